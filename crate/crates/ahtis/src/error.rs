use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A symmetric matrix had a non-positive Cholesky pivot.
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// An argument was outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The escort of the target has no finite second-order moments for the
    /// requested tail parameter, so the optimal (mu, Sigma) is undefined.
    #[error("escort moments undefined: nu_alpha = {nu_alpha} <= 2")]
    InfeasibleEscortMoments { nu_alpha: f64 },

    /// Importance weights collapsed (all zero / non-finite, or too few
    /// effective samples to continue).
    #[error("degenerate importance weights: {0}")]
    DegenerateWeights(String),

    /// The GP gram matrix stayed non-positive-definite after maximum jitter.
    #[error("gram matrix not positive definite after maximum jitter")]
    GramNotPd,

    /// An iterative optimizer ran out of iterations before reaching its
    /// tolerance.
    #[error("optimizer diverged: |grad| = {grad_norm:.3e} after {iterations} iterations")]
    OptimizerDiverged { iterations: usize, grad_norm: f64 },

    /// A data file had a malformed cell.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// A data file is missing required columns or rows.
    #[error("schema error: {0}")]
    Schema(String),

    /// A run configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// I/O failure, stringified to keep the error type cloneable.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
