use std::io;

use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// Variants are grouped by what the caller can do about them: shape and
/// contract violations are programming or configuration mistakes, format and
/// consistency errors come from bad input files, numeric failures come from
/// diverging computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A training loop hit a non-finite value. `step` is the failing step;
    /// every step before it completed cleanly.
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// True for errors that stem from a non-finite value.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::Diverged { .. })
    }
}
