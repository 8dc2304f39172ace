//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by constructions and checks in this crate.
///
/// `Parameter` is reserved for inputs that violate a mathematical
/// precondition (dimension mismatches, out-of-range probabilities, empty
/// theorem ranges). `CheckFailed` means a well-posed verification ran and
/// the asserted inequality or identity does not hold. The CLI maps the two
/// onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A verification ran to completion and failed.
    #[error("check failed: {0}")]
    CheckFailed(String),

    /// Numerical routine could not reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A matrix expected to be invertible (or PSD) was singular at the
    /// working tolerance.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Construction would exceed the configured size cap.
    #[error("size limit: {0}")]
    SizeLimit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for parameter errors.
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Convenience constructor for failed checks.
    pub fn check(msg: impl Into<String>) -> Self {
        Error::CheckFailed(msg.into())
    }

    /// Convenience constructor for size-cap violations.
    pub fn size(msg: impl Into<String>) -> Self {
        Error::SizeLimit(msg.into())
    }

    /// Convenience constructor for singular-matrix failures.
    pub fn singular(msg: impl Into<String>) -> Self {
        Error::Singular(msg.into())
    }
}
