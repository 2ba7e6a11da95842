use std::path::PathBuf;
use std::process::{Command, Output};

fn dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(sub)
}

fn cfg(name: &str) -> String {
    dir("configs").join(name).to_string_lossy().into_owned()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(dir("golden").join(name)).unwrap()
}

fn detkey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detkey"))
        .args(args)
        .env_remove("DETKEY_ENUM_CAP")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn demo_matches_golden() {
    let o = detkey(&["demo"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("demo.txt"));
}

#[test]
fn audit_static_matches_golden() {
    let o = detkey(&["audit", &cfg("static_4422.cfg")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("audit_static_4422.txt"));
    assert!(stdout(&o).contains("r_sd                      1.0\n"));

    let o = detkey(&["audit", &cfg("static_4422.cfg"), "--json"]);
    assert_eq!(stdout(&o), golden("audit_static_4422.json"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["r_sd"], 1.0);
    assert_eq!(v["report"]["leakage_is_exactly_zero"], true);
}

#[test]
fn audit_mixed_matches_golden() {
    let o = detkey(&["audit", &cfg("mixed_5511.cfg"), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("audit_mixed_5511.txt"));
}

#[test]
fn config_errors_exit_2() {
    for name in ["bad_topology.cfg", "mixed_no_private.cfg", "does_not_exist.cfg"] {
        let o = detkey(&["audit", &cfg(name)]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(o.stdout.is_empty());
    }
    let o = detkey(&["audit", &cfg("bad_topology.cfg")]);
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert!(err.contains("line 4, column 7"), "{err}");
}

#[test]
fn cap_errors_exit_3_with_required_bits() {
    let o = detkey(&["audit", &cfg("over_cap.cfg")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("B = 42"));

    let o = Command::new(env!("CARGO_BIN_EXE_detkey"))
        .args(["audit", &cfg("static_4422.cfg")])
        .env("DETKEY_ENUM_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_secure_rate_over_eve_levels() {
    let o = detkey(&["sweep", &cfg("static_5555.cfg"), "--param", "n_1", "--values", "1,2,3,4,6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("sweep_n1.csv"));
    let r_sd: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect();
    assert_eq!(r_sd, ["2.0", "1.5", "1.0", "0.5"]);
    assert!(stdout(&o).lines().last().unwrap().starts_with("6,ERROR"));
}

#[test]
fn sweep_rounds_without_coherence() {
    let o = detkey(&["sweep", &cfg("pilot_never.cfg"), "--param", "rounds", "--values", "1,2,3,4"]);
    assert_eq!(stdout(&o), golden("sweep_rounds.csv"));
    let r_d: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (i, r) in r_d.iter().enumerate() {
        assert_eq!(*r, r_d[0] / (i + 1) as f64);
    }
}

#[test]
fn sweep_edge_cases() {
    let o = detkey(&["sweep", &cfg("static_4422.cfg"), "--param", "n_1", "--values", ""]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "n_1,r_d,r_sd,key_entropy,leakage,mismatch\n");
    let o = detkey(&["sweep", &cfg("static_4422.cfg"), "--param", "scheme", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bound_command() {
    let o = detkey(&["bound", "--p", "1", "--sigma-k-sq", "0", "--sigma-z-sq", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("value       0.0\n"));

    let o = detkey(&["bound", "--p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("usage:"));

    let o = detkey(&["bound", "--p", "-1", "--sigma-k-sq", "1", "--sigma-z-sq", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = detkey(&["bound", "--p", "1", "--sigma-k-sq", "1", "--sigma-z-sq", "1", "--rel-tol", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = detkey(&["bound", "--p", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bound_methods_agree() {
    let csv = |method: &str| {
        let o = detkey(&["bound", "--config", &cfg("gaussian.cfg"), "--method", method, "--csv"]);
        assert_eq!(o.status.code(), Some(0));
        let row = stdout(&o).lines().nth(1).unwrap().to_string();
        let f: Vec<String> = row.split(',').map(str::to_string).collect();
        (f[4].parse::<f64>().unwrap(), f[5].parse::<f64>().unwrap())
    };
    let (mc, se) = csv("mc");
    let (quad, _) = csv("quad");
    assert!((mc - quad).abs() <= 4.0 * se, "mc={mc} se={se} quad={quad}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for args in [
        vec!["demo".to_string()],
        vec!["audit".into(), cfg("product_random.cfg"), "--workers".into(), "1".into()],
        vec!["audit".into(), cfg("product_random.cfg"), "--workers".into(), "3".into()],
        vec!["bound".into(), "--config".into(), cfg("gaussian.cfg"), "--method".into(), "mc".into()],
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(detkey(&args).stdout, detkey(&args).stdout, "{args:?}");
    }
    assert_eq!(
        detkey(&["audit", &cfg("product_random.cfg"), "--workers", "1"]).stdout,
        detkey(&["audit", &cfg("product_random.cfg"), "--workers", "3"]).stdout
    );
}
