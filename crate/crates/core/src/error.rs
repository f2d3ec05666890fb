use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GiaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension violation at {index}: {reason}")]
    Dimension { index: String, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("alignment set has {size} links, above the subset-enumeration cap of {cap}; use the rank test")]
    UnsupportedSize { size: usize, cap: usize },

    #[error("initial leakage is zero: the instance is already aligned")]
    DegenerateInstance,

    #[error("singular value decomposition did not converge")]
    NoConvergence,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GiaError {
    fn from(e: std::io::Error) -> Self {
        GiaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GiaError>;
