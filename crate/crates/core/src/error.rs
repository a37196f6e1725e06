use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver failed to converge for a {dim}x{dim} matrix after {sweeps} sweeps")]
    NoConvergence { dim: usize, sweeps: usize },

    #[error("matrix logarithm undefined: eigenvalue {eigenvalue:e} + eps {eps:e} is not positive")]
    LogDomain { eigenvalue: f64, eps: f64 },

    #[error("invalid sequence {label:?}: {reason}")]
    InvalidSequence { label: String, reason: String },

    #[error("degenerate descriptor for sequence {label:?}: {reason}")]
    DegenerateDescriptor { label: String, reason: String },

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller learn_rate")]
    Divergence { epoch: usize },

    #[error("problem too large for an exact Gram matrix: {n} samples (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("too many descriptor failures: {failed} of {total} samples")]
    SystematicFailure { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DimensionMismatch { .. } | Error::Contract(_) | Error::TooLarge { .. } => {
                ErrorClass::Usage
            }
            Error::NoConvergence { .. }
            | Error::LogDomain { .. }
            | Error::Divergence { .. }
            | Error::DegenerateDescriptor { .. }
            | Error::SystematicFailure { .. } => ErrorClass::Numeric,
            Error::InvalidSequence { .. }
            | Error::Parse { .. }
            | Error::Dataset(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Data,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
