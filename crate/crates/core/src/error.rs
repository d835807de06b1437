use thiserror::Error;

/// Errors raised by the group, calculus, sampling and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarnotError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point {point:?} lies on the singular set of the field")]
    SingularPoint { point: Vec<f64> },

    #[error("empty sampling domain: {0}")]
    EmptyDomain(String),

    #[error("numerical precision not reached: {what} (achieved {achieved:e}, wanted {wanted:e})")]
    Precision {
        what: String,
        achieved: f64,
        wanted: f64,
    },

    #[error("ill-conditioned problem: {0}")]
    Conditioning(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("non-finite evaluations at {} point(s), first {first:?}", count)]
    Data { count: usize, first: Vec<f64> },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CarnotError {
    fn from(e: std::io::Error) -> Self {
        CarnotError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CarnotError>;
