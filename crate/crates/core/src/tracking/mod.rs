//! Model-level quality tracking over the stream of per-inference novelty outputs.

pub mod drift;
pub mod expectation;
pub mod moments;
pub mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::drift::{check_drift, DriftAlert, DriftMonitor, DriftPolicy, Statistic};
pub use self::expectation::{bernoulli_skew_ratio_form, expected_moments, BernoulliExpectation};
pub use self::moments::StreamingMoments;
pub use self::session::{write_tracking_row, TrackingRow, TrackingSession, TRACKING_CSV_HEADER};

use crate::error::{Error, Result};
use crate::record::{DetectorId, OsrScore};

/// What is fed to the tracker for each scored record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackMode {
    /// 1 when the record is flagged unknown, else 0.
    #[default]
    Binary,
    /// The raw score value; no closed-form baseline applies.
    Raw,
}

impl TrackMode {
    pub fn sample(self, score: &OsrScore) -> f64 {
        match self {
            TrackMode::Binary => f64::from(u8::from(score.is_unknown)),
            TrackMode::Raw => score.value,
        }
    }
}

impl FromStr for TrackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(TrackMode::Binary),
            "raw" => Ok(TrackMode::Raw),
            _ => Err(Error::InvalidInput(format!("unknown tracking mode `{s}`"))),
        }
    }
}

impl fmt::Display for TrackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackMode::Binary => "binary",
            TrackMode::Raw => "raw",
        })
    }
}

/// Tracker state kept in a bundle so monitoring can resume after a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    pub detector: DetectorId,
    pub mode: TrackMode,
    pub moments: StreamingMoments,
}

impl TrackerState {
    pub fn validate(&self) -> Result<()> {
        let m = &self.moments;
        if !(m.mean.is_finite() && m.m2.is_finite() && m.m3.is_finite()) {
            return Err(Error::Invariant("tracker moments are not finite".into()));
        }
        if m.m2 < 0.0 {
            return Err(Error::Invariant("tracker second moment is negative".into()));
        }
        if m.n == 0 && (m.mean != 0.0 || m.m2 != 0.0 || m.m3 != 0.0) {
            return Err(Error::Invariant("empty tracker with non-zero moments".into()));
        }
        Ok(())
    }
}
