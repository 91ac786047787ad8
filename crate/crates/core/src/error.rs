use thiserror::Error;

/// Errors returned by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("quadruple {0} is not on the Descartes cone")]
    NotOnCone(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("resource cap exceeded: {what} (limit {limit})")]
    ResourceCap { what: String, limit: u64 },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("quadrature tolerance failed: {0}")]
    Tolerance(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
