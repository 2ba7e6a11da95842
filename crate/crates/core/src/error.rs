use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cannot truncate a {len}-bit word to {m} bits")]
    TruncateOutOfRange { m: usize, len: usize },

    #[error("bit words used as matrix columns must be non-empty")]
    EmptyVector,

    #[error("lower-triangular Toeplitz matrix with zero diagonal is singular")]
    Singular,

    #[error("invalid hex word {0:?}")]
    InvalidHex(String),

    #[error("snr must be positive and finite, got {0}")]
    InvalidSnr(f64),

    #[error("gain magnitude must be normalized to >= 1, got {0}")]
    GainBelowOne(f64),

    #[error("levels must be at least 1")]
    ZeroLevels,

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("scheme not applicable: {0}")]
    SchemeNotApplicable(String),

    #[error("protocol needs at least one round")]
    NoRounds,

    #[error("enumeration needs 2^{required} assignments, cap is 2^{cap}")]
    EnumerationCap { required: u32, cap: u32 },

    #[error("invalid gaussian parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge: best estimate {estimate} (error {error_estimate})")]
    NoConvergence { estimate: f64, error_estimate: f64 },

    #[error("malformed transcript line {line}: {reason}")]
    MalformedTranscript { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
