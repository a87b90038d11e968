use thiserror::Error;

/// Errors raised by the library.
///
/// The variants line up with the CLI exit-code classes: `Domain` and
/// `Support` are domain failures, `DegenerateData`/`InsufficientData`/
/// `VanishedComponent` are data failures, the rest are numerical failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in `{field}`: {reason}")]
    Domain { field: String, reason: String },

    #[error("observation outside the support of {family}: {reason}")]
    Support { family: &'static str, reason: String },

    #[error("parameter vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("mixture component {index} vanished (responsibility mass {mass:e})")]
    VanishedComponent { index: usize, mass: f64 },

    #[error("all components underflow for observation row {row}")]
    Underflow { row: usize },

    #[error("families differ: {left} vs {right}")]
    FamilyMismatch { left: String, right: String },

    #[error("operation not supported for {family}: {reason}")]
    Unsupported { family: &'static str, reason: String },

    #[error("quadrature did not converge (estimate {estimate}, error bound {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("root finding failed after {iterations} iterations (last iterate {last})")]
    Newton { iterations: usize, last: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn support(family: &'static str, reason: impl Into<String>) -> Self {
        Error::Support {
            family,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
