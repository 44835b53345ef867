//! Crate-wide error type.

use std::path::PathBuf;

/// Errors surfaced by configuration validation, solvers, and experiment I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration or argument failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The requested problem has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative solver hit its iteration cap before converging.
    #[error("iteration limit reached in {0}")]
    IterLimit(&'static str),

    /// File I/O failed; the path gives context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Config file or result payload failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    /// True when the error means "no feasible allocation exists", as opposed
    /// to bad input or an internal failure.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}
