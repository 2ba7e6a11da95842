//! Command-line front end: config parsing and the `audit`, `sweep`,
//! `bound` and `demo` subcommands.

pub mod commands;
pub mod config;

pub use commands::{cmd_audit, cmd_bound, cmd_demo, cmd_sweep, AuditOptions, BoundArgs, BoundMethod};
pub use config::{ConfigError, ExperimentConfig};
