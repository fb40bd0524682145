use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("exponent p = {0} outside the supported range [1.1, 10]")]
    InvalidExponent(f64),

    #[error("space dimension must be at least 1")]
    InvalidDimension,

    #[error("vector has non-finite coordinates")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid convex set: {0}")]
    InvalidSet(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("operator has no zeros: {0}")]
    EmptyZeroSet(String),

    /// One or more theorem hypotheses are not met by the supplied data.
    #[error("hypothesis violated: {}", .0.join("; "))]
    Hypothesis(Vec<String>),

    #[error("inner solver did not converge: {0}")]
    InnerSolver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
