use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use detkey_cli::commands::{self, AuditOptions, BoundArgs, BoundMethod};

#[derive(Parser)]
#[command(name = "detkey", version, about = "Key generation over linear deterministic channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mc,
    Quad,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustively audit one configuration.
    Audit {
        config: PathBuf,
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
        /// Enumeration worker threads.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Audit a configuration once per value of one numeric field; CSV output.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0.., allow_hyphen_values = true)]
        values: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate the Gaussian mutual-information lower bound.
    Bound {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        sigma_k_sq: Option<f64>,
        #[arg(long)]
        sigma_z_sq: Option<f64>,
        #[arg(long, value_enum, default_value = "quad")]
        method: Method,
        /// Monte Carlo sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Quadrature relative tolerance.
        #[arg(long)]
        rel_tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Read missing parameters from a config's gaussian.* keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Emit a CSV header and row.
        #[arg(long)]
        csv: bool,
    },
    /// Run one worked product-signalling round and print everything.
    Demo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let cap_override = std::env::var("DETKEY_ENUM_CAP").ok();
    let result = match cli.command {
        Command::Audit { config, json, workers } => {
            let opts = AuditOptions { json, workers, cap_override };
            commands::cmd_audit(&config, &opts, &mut out, &mut err)
        }
        Command::Sweep { config, param, values, workers } => {
            let opts = AuditOptions { json: false, workers, cap_override };
            let values: Vec<String> = values.into_iter().filter(|v| !v.trim().is_empty()).collect();
            commands::cmd_sweep(&config, &param, &values, &opts, &mut out, &mut err)
        }
        Command::Bound { p, sigma_k_sq, sigma_z_sq, method, samples, rel_tol, seed, config, csv } => {
            let args = BoundArgs {
                p,
                sigma_k_sq,
                sigma_z_sq,
                method: Some(match method {
                    Method::Mc => BoundMethod::Mc,
                    Method::Quad => BoundMethod::Quad,
                }),
                samples,
                rel_tol,
                seed,
                config,
                csv,
            };
            commands::cmd_bound(&args, &mut out, &mut err)
        }
        Command::Demo => commands::cmd_demo(&mut out),
    };
    let code = match result.and_then(|c| out.flush().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "i/o error: {e}");
            1
        }
    };
    ExitCode::from(code as u8)
}
