use thiserror::Error;

use crate::record::DetectorId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated input at byte offset {offset}: last complete record index is {last_complete:?}")]
    Truncated {
        offset: u64,
        /// `None` when not a single record was complete.
        last_complete: Option<u64>,
    },

    #[error("record {sample_id}: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        sample_id: u64,
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: u64, column: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{detector}: fit failed: {message}")]
    Fit { detector: DetectorId, message: String },

    #[error("degenerate Weibull tail: {0}")]
    DegenerateTail(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{detector}: bundle does not cover this detector: {message}")]
    Coverage { detector: DetectorId, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn fit(detector: DetectorId, message: impl Into<String>) -> Self {
        Error::Fit {
            detector,
            message: message.into(),
        }
    }

    /// True for errors caused by numerical fitting rather than malformed data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Fit { .. } | Error::DegenerateTail(_) | Error::Convergence { .. } | Error::Numerical(_)
        )
    }
}
