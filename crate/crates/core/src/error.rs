use thiserror::Error;

/// Errors raised by the numerical kernels, proximity operators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition (shape, sign, finiteness).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A function was evaluated outside its domain, or produced a non-finite value.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative method gave up before meeting its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// Cholesky factorization met a non-positive pivot.
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "{name} must be finite, got {value}"
        )))
    }
}
