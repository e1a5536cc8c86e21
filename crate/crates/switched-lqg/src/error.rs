use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible or invalid matrix/vector dimensions.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An input contained NaN or infinite entries.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A matrix required to be symmetric positive definite is not.
    #[error("not symmetric positive definite: {0}")]
    NotSpd(String),

    /// A matrix required to be Schur-stable (spectral radius < 1) is not.
    #[error("not Schur-stable: {0}")]
    NotSchurStable(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    Convergence(String),

    /// A certificate precondition (Assumption 1 or 2) is violated.
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// Random model generation exhausted its retry budget.
    #[error("model generation failed: {0}")]
    Generation(String),

    /// Model or config file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Requested data was not recorded or is otherwise unavailable.
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
