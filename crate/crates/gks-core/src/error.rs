//! Error type shared by every numerical routine in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GksError>;

#[derive(Debug, Error)]
pub enum GksError {
    /// An iterative solver ran out of iterations or stalled.
    #[error("{what}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// Input outside the domain a routine is defined on.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// A parameter sits in (or too close to) a degenerate limit of the wave
    /// family where the requested quantity loses meaning or accuracy.
    #[error("degenerate limit: {what}")]
    DegenerateLimit { what: String },

    /// A linear solvability condition that must hold analytically was violated
    /// beyond tolerance; `pairing` is the offending inner product.
    #[error("solvability violation in {context}: pairing {pairing:.3e}")]
    Solvability { context: String, pairing: f64 },

    /// Dense linear algebra failed (singular system, eigensolver breakdown).
    #[error("linear algebra failure: {context}")]
    Linalg { context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents (bad magic, truncated payload, bad header).
    #[error("format error: {what}")]
    Format { what: String },
}

impl GksError {
    pub fn invalid(what: impl Into<String>) -> Self {
        GksError::InvalidParameter { what: what.into() }
    }

    pub fn degenerate(what: impl Into<String>) -> Self {
        GksError::DegenerateLimit { what: what.into() }
    }

    pub fn linalg(context: impl Into<String>) -> Self {
        GksError::Linalg {
            context: context.into(),
        }
    }

    pub fn format(what: impl Into<String>) -> Self {
        GksError::Format { what: what.into() }
    }
}
