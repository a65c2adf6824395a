//! Crate-wide error type.

/// Errors surfaced by solvers, oracles, schemes, and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested model/mode combination is not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A file or structure failed to parse or violated a stated invariant.
    /// The message names the failing constraint.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Iterative solver did not reach the residual target. The caller may
    /// fall back to an enumeration-based method.
    #[error("no convergence after {iterations} iterations, last residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Two routes that must agree disagreed beyond tolerance. Always a bug.
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
    pub fn inconsistent(msg: impl Into<String>) -> Self {
        Error::Inconsistent(msg.into())
    }
}
