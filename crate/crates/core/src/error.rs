use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration field violates a model invariant.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid argument to {op}: {reason}")]
    Argument { op: &'static str, reason: String },

    /// Quadrature or root finding gave up; carries the best estimate so far.
    #[error("{op} did not converge (estimate {estimate:e}, error bound {error_bound:e})")]
    NoConvergence {
        op: &'static str,
        estimate: f64,
        error_bound: f64,
    },

    #[error("alternating sum in {op} lost precision: raw value {raw:e}")]
    Cancellation { op: &'static str, raw: f64 },

    #[error("model consistency check failed in {op}: {reason}")]
    ModelConsistency { op: &'static str, reason: String },

    #[error("estimation failed: {0}")]
    Estimation(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn argument(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Argument {
            op,
            reason: reason.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Argument { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
