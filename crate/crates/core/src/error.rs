use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::cloud::Violation;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violates an operation's precondition.
    InvalidArgument(String),
    /// The two clouds carry different feature schemas.
    SchemaMismatch { target: String, source: String },
    /// No pair of points falls within the kernel cutoff at the starting lengthscale.
    NoOverlap { cutoff_radius: f64 },
    /// A cloud failed validation.
    InvalidCloud(Vec<Violation>),
    /// An evaluator found nothing to evaluate.
    EmptyReport(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SchemaMismatch { target, source } => {
                write!(f, "schema mismatch: target {target} vs source {source}")
            }
            Error::NoOverlap { cutoff_radius } => {
                write!(f, "no overlap: zero point pairs within cutoff radius {cutoff_radius} m")
            }
            Error::InvalidCloud(violations) => {
                write!(f, "invalid cloud: {} violation(s)", violations.len())?;
                if let Some(first) = violations.first() {
                    write!(f, ", first: {first}")?;
                }
                Ok(())
            }
            Error::EmptyReport(msg) => write!(f, "empty report: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
