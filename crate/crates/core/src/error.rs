use thiserror::Error;

/// Errors produced by the compressor, the recovery loop and the tooling around them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("could not generate a full row-rank {rows}x{cols} sensing matrix after {attempts} attempts")]
    GenerationFailure {
        rows: usize,
        cols: usize,
        attempts: usize,
    },

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("signal variance scale is zero")]
    DegenerateGamma,

    #[error("correlation regularization failed: {0}")]
    RegularizationFailure(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("signal too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
