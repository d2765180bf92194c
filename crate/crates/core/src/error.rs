use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular pivot {pivot:e} at row {row} (threshold {threshold:e})")]
    SingularPivot {
        row: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("grid was built for a different option kind")]
    GridModeMismatch,

    #[error("formula not applicable: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
