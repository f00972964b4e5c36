use thiserror::Error;

/// Failures surfaced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no convergence after {iterations} iterations (bracket [{lo}, {hi}])")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("no bracket: {0}")]
    NoBracket(String),
    #[error("quadrature failure: estimated error {estimate:e}")]
    Quadrature { estimate: f64 },
    #[error("constraint violation at codeword {index}: {detail}")]
    ConstraintViolation { index: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
