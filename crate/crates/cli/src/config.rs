//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # static gains everywhere
//! scheme = product
//! n_a = 4
//! n_b = 4
//! n_1 = 2
//! n_2 = 2
//! eve_mode = static
//! legit_mode = static
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors that carry a line and column.

use std::fmt;

use detkey::detmodel::{ChannelTopology, Coherence, GainMode};
use detkey::gaussian::GaussianParams;
use detkey::protocols::Scheme;
use detkey::secrecy::DEFAULT_ENUM_CAP;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based; 0 when the error is not tied to a line.
    pub line: usize,
    /// 1-based.
    pub column: usize,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self::at(0, 0, message)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at line {}, column {}: {}", self.line, self.column, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Optional Gaussian block (`gaussian.*` keys).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianBlock {
    pub p: Option<f64>,
    pub sigma_k_sq: Option<f64>,
    pub sigma_z_sq: Option<f64>,
    pub samples: Option<usize>,
    pub rel_tol: Option<f64>,
}

impl GaussianBlock {
    pub fn is_empty(&self) -> bool {
        *self == GaussianBlock::default()
    }

    pub fn params(&self) -> Option<detkey::Result<GaussianParams>> {
        Some(GaussianParams::new(self.p?, self.sigma_k_sq?, self.sigma_z_sq?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub n_a: usize,
    pub n_b: usize,
    pub n_1: usize,
    pub n_2: usize,
    pub eve_mode: GainMode,
    pub legit_mode: GainMode,
    pub coherence: Coherence,
    pub rounds: usize,
    pub seed: u64,
    pub enum_cap: u32,
    pub gaussian: GaussianBlock,
}

/// Numeric fields that `sweep` may vary.
pub const SWEEPABLE: [&str; 7] = ["n_a", "n_b", "n_1", "n_2", "rounds", "seed", "enum_cap"];

const KEYS: [&str; 16] = [
    "scheme",
    "n_a",
    "n_b",
    "n_1",
    "n_2",
    "eve_mode",
    "legit_mode",
    "coherence",
    "rounds",
    "seed",
    "enum_cap",
    "gaussian.p",
    "gaussian.sigma_k_sq",
    "gaussian.sigma_z_sq",
    "gaussian.samples",
    "gaussian.rel_tol",
];

pub fn gain_mode_name(m: GainMode) -> &'static str {
    match m {
        GainMode::StaticIdentity => "static",
        GainMode::RandomGain => "random",
    }
}

pub fn coherence_name(c: Coherence) -> &'static str {
    match c {
        Coherence::EveryRound => "every-round",
        Coherence::Never => "never",
    }
}

fn parse_scheme(v: &str) -> Result<Scheme, String> {
    match v {
        "pilot" => Ok(Scheme::Pilot),
        "product" => Ok(Scheme::Product),
        "mixed" => Ok(Scheme::Mixed),
        _ => Err(format!("unknown scheme `{v}` (expected pilot, product or mixed)")),
    }
}

fn parse_gain_mode(v: &str) -> Result<GainMode, String> {
    match v {
        "static" => Ok(GainMode::StaticIdentity),
        "random" => Ok(GainMode::RandomGain),
        _ => Err(format!("unknown gain mode `{v}` (expected static or random)")),
    }
}

fn parse_coherence(v: &str) -> Result<Coherence, String> {
    match v {
        "every-round" => Ok(Coherence::EveryRound),
        "never" => Ok(Coherence::Never),
        _ => Err(format!("unknown coherence `{v}` (expected every-round or never)")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a valid number"))
}

/// Raw key/value pairs with positions, before typing.
#[derive(Default)]
struct Entries {
    items: Vec<(String, String, usize, usize)>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<&(String, String, usize, usize)> {
        self.items.iter().find(|(k, ..)| k == key)
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut entries = Entries::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let key_col = content.len() - content.trim_start().len() + 1;
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::at(line_no, key_col, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        let value_part = &content[eq + 1..];
        let value = value_part.trim();
        let value_col = eq + 2 + (value_part.len() - value_part.trim_start().len());
        if key.is_empty() {
            return Err(ConfigError::at(line_no, key_col, "missing key before `=`"));
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::at(line_no, key_col, format!("unknown key `{key}`")));
        }
        if entries.get(key).is_some() {
            return Err(ConfigError::at(line_no, key_col, format!("duplicate key `{key}`")));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line_no, value_col, format!("missing value for `{key}`")));
        }
        entries.items.push((key.to_string(), value.to_string(), line_no, value_col));
    }
    Ok(entries)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = tokenize(text)?;
        fn field<T>(
            entries: &Entries,
            key: &str,
            parse: impl Fn(&str) -> Result<T, String>,
        ) -> Result<Option<T>, ConfigError> {
            match entries.get(key) {
                None => Ok(None),
                Some((_, v, line, col)) => parse(v).map(Some).map_err(|m| ConfigError::at(*line, *col, m)),
            }
        }
        let required = |key: &str| ConfigError::global(format!("missing required key `{key}`"));

        let cfg = Self {
            scheme: field(&entries, "scheme", parse_scheme)?.ok_or_else(|| required("scheme"))?,
            n_a: field(&entries, "n_a", parse_num)?.ok_or_else(|| required("n_a"))?,
            n_b: field(&entries, "n_b", parse_num)?.ok_or_else(|| required("n_b"))?,
            n_1: field(&entries, "n_1", parse_num)?.ok_or_else(|| required("n_1"))?,
            n_2: field(&entries, "n_2", parse_num)?.ok_or_else(|| required("n_2"))?,
            eve_mode: field(&entries, "eve_mode", parse_gain_mode)?.unwrap_or(GainMode::RandomGain),
            legit_mode: field(&entries, "legit_mode", parse_gain_mode)?.unwrap_or(GainMode::RandomGain),
            coherence: field(&entries, "coherence", parse_coherence)?.unwrap_or(Coherence::EveryRound),
            rounds: field(&entries, "rounds", parse_num)?.unwrap_or(1),
            seed: field(&entries, "seed", parse_num)?.unwrap_or(0),
            enum_cap: field(&entries, "enum_cap", parse_num)?.unwrap_or(DEFAULT_ENUM_CAP),
            gaussian: GaussianBlock {
                p: field(&entries, "gaussian.p", parse_num)?,
                sigma_k_sq: field(&entries, "gaussian.sigma_k_sq", parse_num)?,
                sigma_z_sq: field(&entries, "gaussian.sigma_z_sq", parse_num)?,
                samples: field(&entries, "gaussian.samples", parse_num)?,
                rel_tol: field(&entries, "gaussian.rel_tol", parse_num)?,
            },
        };
        // Report semantic errors at the line that introduced the offending value.
        let blame = |keys: &[&str], msg: String| match keys.iter().filter_map(|k| entries.get(k)).max_by_key(|e| e.2) {
            Some((_, _, line, col)) => ConfigError::at(*line, *col, msg),
            None => ConfigError::global(msg),
        };
        cfg.validate()
            .map_err(|(keys, msg)| blame(&keys, msg))?;
        Ok(cfg)
    }

    pub fn topology(&self) -> detkey::Result<ChannelTopology> {
        ChannelTopology::with_modes(self.n_a, self.n_b, self.n_1, self.n_2, self.eve_mode, self.legit_mode)
    }

    /// Checks everything the audit needs; on failure returns the keys to
    /// blame and a message.
    pub fn validate(&self) -> Result<(), (Vec<&'static str>, String)> {
        let topo = self.topology().map_err(|e| {
            let m = self.n_a.min(self.n_b);
            let culprit = [("n_a", self.n_a == 0), ("n_b", self.n_b == 0), ("n_1", self.n_1 == 0 || self.n_1 > m)]
                .into_iter()
                .find(|&(_, bad)| bad)
                .map_or("n_2", |(k, _)| k);
            (vec![culprit], e.to_string())
        })?;
        self.scheme
            .validate(&topo)
            .map_err(|e| (vec!["scheme", "n_a", "n_b", "n_1", "n_2", "eve_mode"], e.to_string()))?;
        if self.rounds == 0 {
            return Err((vec!["rounds"], "rounds must be at least 1".into()));
        }
        if !self.gaussian.is_empty() {
            let g = &self.gaussian;
            let probe = GaussianParams {
                p: g.p.unwrap_or(1.0),
                sigma_k_sq: g.sigma_k_sq.unwrap_or(1.0),
                sigma_z_sq: g.sigma_z_sq.unwrap_or(1.0),
            };
            probe
                .validate()
                .map_err(|e| (vec!["gaussian.p", "gaussian.sigma_k_sq", "gaussian.sigma_z_sq"], e.to_string()))?;
            if g.samples == Some(0) {
                return Err((vec!["gaussian.samples"], "gaussian.samples must be at least 1".into()));
            }
            if let Some(t) = g.rel_tol {
                if !(t > 0.0 && t <= 1e-2) {
                    return Err((vec!["gaussian.rel_tol"], format!("gaussian.rel_tol must lie in (0, 1e-2], got {t}")));
                }
            }
        }
        Ok(())
    }

    /// Copy with one numeric field replaced, for sweeps.
    pub fn with_field(&self, name: &str, value: &str) -> Result<Self, String> {
        let mut c = self.clone();
        match name {
            "n_a" => c.n_a = parse_num(value)?,
            "n_b" => c.n_b = parse_num(value)?,
            "n_1" => c.n_1 = parse_num(value)?,
            "n_2" => c.n_2 = parse_num(value)?,
            "rounds" => c.rounds = parse_num(value)?,
            "seed" => c.seed = parse_num(value)?,
            "enum_cap" => c.enum_cap = parse_num(value)?,
            _ => return Err(format!("`{name}` is not a sweepable field (one of {})", SWEEPABLE.join(", "))),
        }
        c.validate().map_err(|(_, m)| m)?;
        Ok(c)
    }
}
