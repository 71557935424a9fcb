use thiserror::Error;

/// Errors produced by tensor construction, regularizers, solvers and file IO.
#[derive(Debug, Error)]
pub enum EnrError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode {mode} out of range for order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("non-finite value at linear offset {0}")]
    NonFinite(usize),

    #[error("inconsistent rank across factors: {0}")]
    InconsistentRank(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("observation mask is empty")]
    EmptyMask,

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EnrError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        EnrError::InvalidParameter(msg.into())
    }

    /// True for errors that come from the numerics rather than from the
    /// caller's inputs. The CLI maps these to exit code 2.
    pub fn is_numeric(&self) -> bool {
        matches!(self, EnrError::Numeric(_) | EnrError::ZeroDenominator(_))
    }
}

pub type Result<T> = std::result::Result<T, EnrError>;
