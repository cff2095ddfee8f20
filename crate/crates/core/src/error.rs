use thiserror::Error;

/// Errors raised by the estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("sample covariance is singular and no penalty was supplied")]
    SingularInput,

    #[error("{0} is singular")]
    Singular(&'static str),

    #[error("correlation parameter {0} must lie strictly inside (-1, 1)")]
    BadRho(f64),

    #[error("penalty {0} must be positive")]
    BadGamma(f64),

    #[error("rank {rank} exceeds the maximum {max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("cannot split {n} observations into {k} folds")]
    BadK { n: usize, k: usize },

    #[error("estimator {0} needs the generating parameters attached")]
    MissingOracle(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
