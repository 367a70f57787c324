use thiserror::Error;

/// Errors raised while building, solving or simulating a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{what} is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { what: String, min_eig: f64 },
    #[error("{what} is not positive semi-definite (min eigenvalue {min_eig:e})")]
    NotPsd { what: String, min_eig: f64 },
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("singular block: {0}")]
    SingularBlock(String),
    #[error("time index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
