use serde::Serialize;
use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Every variant maps to one of two CLI exit classes: argument/domain
/// problems are validation failures, everything else is a numerical failure.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: String, value: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value at grid index {index}: {detail}")]
    NonFinite { index: usize, detail: String },

    #[error("corrector failed to converge at step {step} after {iterations} iterations (last update {last_update:e})")]
    NoConvergence {
        step: usize,
        iterations: usize,
        last_update: f64,
    },

    #[error("solution exceeded the overflow guard at step {step} (|value| = {magnitude:e})")]
    BlowUp { step: usize, magnitude: f64 },

    #[error("diagnostic: {0}")]
    Diagnostic(String),
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>, value: f64) -> Self {
        Error::Domain {
            what: what.into(),
            value,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::Argument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
