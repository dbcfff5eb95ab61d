//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by schedule construction, band evaluation, and the
/// scheduling loops.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation. `field` names the offending input.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Filled shares outside the admissible `[0, x0]` range.
    #[error("filled shares {filled} outside [0, {x0}]")]
    FilledOutOfRange { filled: f64, x0: f64 },

    /// Band evaluation requested outside the order's trading window.
    #[error("time {t} outside trading window [{t0}, {t1}]")]
    OutOfWindow { t: f64, t0: f64, t1: f64 },

    /// A tactic failed its minimum-fill contract and the cover attempt
    /// could not repair the shortfall.
    #[error("min-fill breach in bin {bin}: required {required}, filled {filled}")]
    MinFillBreach { bin: usize, required: f64, filled: f64 },

    /// Strategy evaluation failed mid-run; the order is aborted.
    #[error("strategy evaluation failed at t={t}: {reason}")]
    StrategyFailure { t: f64, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {reason}")]
    Parse { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
