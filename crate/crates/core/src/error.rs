use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid synthesis or analysis configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid argument to an operation.
    #[error("argument error: {0}")]
    Argument(String),

    /// Not enough data points to compute a statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A fingerprint with zero standard deviation cannot be used as a metric.
    #[error("degenerate fingerprint: {0}")]
    DegenerateFingerprint(String),

    /// Malformed file content, with the offending 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally valid file that violates a format constraint.
    #[error("format error: {0}")]
    Format(String),

    /// Semantic validation failure (duplicate names, out-of-range values).
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed frame on the replay protocol, with the offending line number.
    #[error("protocol error at line {line}: {msg}")]
    Protocol { line: usize, msg: String },

    /// Socket-level failure (bind, connect, timeout).
    #[error("transport error: {0}")]
    Transport(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
