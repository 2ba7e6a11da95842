//! Subcommand bodies. Each writes to the given streams and returns the
//! process exit code, so they can be driven in-process by tests.

use std::io::{self, Write};
use std::path::Path;

use detkey::detmodel::{sample_gains, ChannelTopology, Coherence, GainMode};
use detkey::gaussian::{theorem1_mc, theorem1_quadrature, BoundEstimate, GaussianParams};
use detkey::protocols::{extract_secure_keys, run, LocalSeeds, Scheme};
use detkey::secrecy::{audit, EnumOptions, SecrecyReport};
use detkey::Error;

use crate::config::{coherence_name, gain_mode_name, ExperimentConfig, SWEEPABLE};

pub const EXIT_OK: i32 = 0;
/// The run completed but the audit did not pass.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

pub const BOUND_USAGE: &str =
    "usage: detkey bound --p <P> --sigma-k-sq <VAR> --sigma-z-sq <VAR> [--method mc|quad] [--samples N] [--rel-tol T] [--seed S] [--config FILE] [--csv]";

/// Settings shared by `audit` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct AuditOptions {
    pub json: bool,
    /// Enumeration threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Raw `DETKEY_ENUM_CAP` value, when set.
    pub cap_override: Option<String>,
}

impl AuditOptions {
    fn enum_options(&self, cfg: &ExperimentConfig) -> Result<EnumOptions, String> {
        let cap = match &self.cap_override {
            Some(raw) => raw
                .trim()
                .parse()
                .map_err(|_| format!("DETKEY_ENUM_CAP=`{raw}` is not a valid integer"))?,
            None => cfg.enum_cap,
        };
        Ok(EnumOptions {
            cap,
            workers: self.workers,
        })
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_audit(cfg: &ExperimentConfig, opts: EnumOptions) -> detkey::Result<SecrecyReport> {
    audit(cfg.scheme, &cfg.topology()?, cfg.rounds, cfg.coherence, opts)
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::EnumerationCap { .. } => EXIT_CAP,
        _ => EXIT_CONFIG,
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::EnumerationCap { required, cap } => {
            format!("enumeration needs B = {required} bits, above the cap of {cap} (raise enum_cap or DETKEY_ENUM_CAP)")
        }
        other => other.to_string(),
    }
}

fn write_config_summary(out: &mut dyn Write, cfg: &ExperimentConfig) -> io::Result<()> {
    writeln!(out, "{:<26}{}", "scheme", cfg.scheme)?;
    writeln!(
        out,
        "{:<26}n_a={} n_b={} n_1={} n_2={}",
        "topology", cfg.n_a, cfg.n_b, cfg.n_1, cfg.n_2
    )?;
    writeln!(out, "{:<26}{}", "eve_mode", gain_mode_name(cfg.eve_mode))?;
    writeln!(out, "{:<26}{}", "legit_mode", gain_mode_name(cfg.legit_mode))?;
    writeln!(out, "{:<26}{}", "coherence", coherence_name(cfg.coherence))?;
    writeln!(out, "{:<26}{}", "rounds", cfg.rounds)
}

pub fn cmd_audit(path: &Path, opts: &AuditOptions, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<i32> {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(m) => {
            writeln!(err, "{m}")?;
            return Ok(EXIT_CONFIG);
        }
    };
    let eo = match opts.enum_options(&cfg) {
        Ok(o) => o,
        Err(m) => {
            writeln!(err, "{m}")?;
            return Ok(EXIT_CONFIG);
        }
    };
    let report = match run_audit(&cfg, eo) {
        Ok(r) => r,
        Err(e) => {
            writeln!(err, "{}", describe(&e))?;
            return Ok(error_code(&e));
        }
    };
    if opts.json {
        let doc = serde_json::json!({
            "scheme": cfg.scheme,
            "n_a": cfg.n_a,
            "n_b": cfg.n_b,
            "n_1": cfg.n_1,
            "n_2": cfg.n_2,
            "eve_mode": gain_mode_name(cfg.eve_mode),
            "legit_mode": gain_mode_name(cfg.legit_mode),
            "coherence": coherence_name(cfg.coherence),
            "rounds": cfg.rounds,
            "report": report,
        });
        let text = serde_json::to_string_pretty(&doc).expect("report serializes");
        writeln!(out, "{text}")?;
    } else {
        write_config_summary(out, &cfg)?;
        writeln!(out, "{report}")?;
    }
    Ok(if report.passes() { EXIT_OK } else { EXIT_FAILED })
}

pub fn sweep_header(param: &str) -> String {
    format!("{param},r_d,r_sd,key_entropy,leakage,mismatch")
}

/// One audited CSV row per value. Infeasible points become
/// `value,ERROR,,,,` rows (details on `err`) and the sweep carries on.
pub fn cmd_sweep(
    path: &Path,
    param: &str,
    values: &[String],
    opts: &AuditOptions,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> io::Result<i32> {
    if !SWEEPABLE.contains(&param) {
        writeln!(err, "`{param}` is not a sweepable field (one of {})", SWEEPABLE.join(", "))?;
        return Ok(EXIT_CONFIG);
    }
    let cfg = match load(path) {
        Ok(c) => c,
        Err(m) => {
            writeln!(err, "{m}")?;
            return Ok(EXIT_CONFIG);
        }
    };
    writeln!(out, "{}", sweep_header(param))?;
    for v in values {
        let point = cfg.with_field(param, v).and_then(|c| {
            let eo = opts.enum_options(&c)?;
            run_audit(&c, eo).map_err(|e| describe(&e))
        });
        match point {
            Ok(rep) => writeln!(out, "{v},{}", rep.csv_fields().join(","))?,
            Err(m) => {
                writeln!(out, "{v},ERROR,,,,")?;
                writeln!(err, "{param}={v}: {m}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Mc,
    Quad,
}

#[derive(Debug, Clone, Default)]
pub struct BoundArgs {
    pub p: Option<f64>,
    pub sigma_k_sq: Option<f64>,
    pub sigma_z_sq: Option<f64>,
    pub method: Option<BoundMethod>,
    pub samples: Option<usize>,
    pub rel_tol: Option<f64>,
    pub seed: Option<u64>,
    /// Config whose `gaussian.*` keys fill in missing flags.
    pub config: Option<std::path::PathBuf>,
    pub csv: bool,
}

pub fn evaluate_bound(args: &BoundArgs) -> Result<(GaussianParams, BoundEstimate), (i32, String)> {
    let cfg = match &args.config {
        Some(p) => Some(load(p).map_err(|m| (EXIT_CONFIG, m))?),
        None => None,
    };
    let block = cfg.as_ref().map(|c| c.gaussian).unwrap_or_default();
    let need = |flag: Option<f64>, from_cfg: Option<f64>, name: &str| {
        flag.or(from_cfg)
            .ok_or_else(|| (EXIT_CONFIG, format!("missing --{name} (or gaussian.{} in --config)", name.replace('-', "_"))))
    };
    let params = GaussianParams::new(
        need(args.p, block.p, "p")?,
        need(args.sigma_k_sq, block.sigma_k_sq, "sigma-k-sq")?,
        need(args.sigma_z_sq, block.sigma_z_sq, "sigma-z-sq")?,
    )
    .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let seed = args.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let est = match args.method.unwrap_or(BoundMethod::Quad) {
        BoundMethod::Mc => theorem1_mc(&params, args.samples.or(block.samples).unwrap_or(DEFAULT_SAMPLES), seed),
        BoundMethod::Quad => theorem1_quadrature(&params, args.rel_tol.or(block.rel_tol).unwrap_or(DEFAULT_REL_TOL)),
    };
    match est {
        Ok(e) => Ok((params, e)),
        Err(e @ Error::NoConvergence { .. }) => Err((EXIT_FAILED, e.to_string())),
        Err(e) => Err((EXIT_CONFIG, e.to_string())),
    }
}

pub fn cmd_bound(args: &BoundArgs, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<i32> {
    let (params, est) = match evaluate_bound(args) {
        Ok(v) => v,
        Err((code, m)) => {
            writeln!(err, "{m}")?;
            if code == EXIT_CONFIG {
                writeln!(err, "{BOUND_USAGE}")?;
            }
            return Ok(code);
        }
    };
    if args.csv {
        writeln!(out, "{}", BoundEstimate::csv_header())?;
        writeln!(out, "{}", est.csv_row(&params))?;
    } else {
        let f = |v: f64| format!("{v:?}");
        writeln!(out, "{:<12}{}", "method", est.method)?;
        writeln!(out, "{:<12}{}", "p", f(params.p))?;
        writeln!(out, "{:<12}{}", "sigma_k_sq", f(params.sigma_k_sq))?;
        writeln!(out, "{:<12}{}", "sigma_z_sq", f(params.sigma_z_sq))?;
        writeln!(out, "{:<12}{}", "value", f(est.value))?;
        writeln!(out, "{:<12}{}", "clamped", f(est.clamped()))?;
        writeln!(out, "{:<12}{}", "std_error", f(est.std_error))?;
        for (i, t) in est.terms.iter().enumerate() {
            writeln!(out, "{:<12}{}", format!("term{}", i + 1), f(*t))?;
        }
    }
    Ok(EXIT_OK)
}

pub const DEMO_GAIN_SEED: u64 = 20;
pub const DEMO_SEEDS: LocalSeeds = LocalSeeds { alice: 2, bob: 5 };

/// One product-signalling round at `(4, 4, 2, 2)` with a random shared gain
/// and a static eavesdropper.
pub fn cmd_demo(out: &mut dyn Write) -> io::Result<i32> {
    let topo = ChannelTopology::with_modes(4, 4, 2, 2, GainMode::StaticIdentity, GainMode::RandomGain)
        .expect("demo topology is valid");
    let gains = sample_gains(&topo, DEMO_GAIN_SEED, 1, Coherence::EveryRound);
    let (transcript, keys) = run(Scheme::Product, &topo, &gains, DEMO_SEEDS).expect("demo run succeeds");
    let secure = extract_secure_keys(&keys, &topo).expect("static eve");
    let r = &transcript.rounds[0];

    writeln!(out, "product signalling, n_a=4 n_b=4 n_1=2 n_2=2, random legitimate gain, static eve")?;
    writeln!(out)?;
    write!(out, "{}", transcript.to_text())?;
    writeln!(out)?;
    writeln!(out, "{:<22}{}", "K first column", r.gains.k_matrix.first_col())?;
    writeln!(out, "{:<22}{}", "K' first column", r.gains.k_prime_matrix.first_col())?;
    writeln!(out, "{:<22}{}", "x_A", r.x_a)?;
    writeln!(out, "{:<22}{}", "x_B", r.x_b)?;
    writeln!(out, "{:<22}{}", "y_A = K' x_B", r.y_a)?;
    writeln!(out, "{:<22}{}", "y_B = K x_A", r.y_b)?;
    writeln!(out, "{:<22}{}", "s_A = T(x_A) y_A", keys.s_a)?;
    writeln!(out, "{:<22}{}", "s_B = T(x_B) y_B", keys.s_b)?;
    writeln!(out, "{:<22}{}", "keys agree", keys.agree())?;
    writeln!(out, "{:<22}{}", "eve view of x_A", r.y_e_odd)?;
    writeln!(out, "{:<22}{}", "eve view of x_B", r.y_e_even)?;
    writeln!(out, "{:<22}{}", "secure key", secure)?;
    writeln!(out, "{:<22}{}", "secure key bits", secure.len())?;
    Ok(EXIT_OK)
}
