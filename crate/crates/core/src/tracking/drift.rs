//! Alerting on the running moments of the novelty indicator stream.
//!
//! The mean policy is one-sided: it fires when the running mean exceeds the
//! baseline rate by `z` binomial standard errors. The skew policy fires when
//! `G1` departs from the expected Bernoulli skew by more than a fraction of
//! it. Both stay silent before `n_min` samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tracking::expectation::expected_moments;
use crate::tracking::moments::StreamingMoments;

pub const DEFAULT_Z: f64 = 4.0;
pub const DEFAULT_SKEW_FRACTION: f64 = 0.25;
pub const DEFAULT_MIN_SAMPLES: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Skew,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Skew => "skew",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPolicy {
    pub statistic: Statistic,
    pub z: f64,
    pub skew_fraction: f64,
    pub n_min: u64,
}

impl DriftPolicy {
    pub fn mean() -> Self {
        DriftPolicy {
            statistic: Statistic::Mean,
            z: DEFAULT_Z,
            skew_fraction: DEFAULT_SKEW_FRACTION,
            n_min: DEFAULT_MIN_SAMPLES,
        }
    }

    pub fn skew() -> Self {
        DriftPolicy {
            statistic: Statistic::Skew,
            ..Self::mean()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftAlert {
    /// Number of samples seen when the alert fired.
    pub index: u64,
    pub statistic: Statistic,
    pub observed: f64,
    /// Accepted band `[lower, upper]` for the statistic at this sample count.
    pub lower: f64,
    pub upper: f64,
    /// Observed deviation over the allowed deviation; above 1 when firing.
    pub severity: f64,
}

impl fmt::Display for DriftAlert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ALERT n={} statistic={} observed={} band=[{}, {}] severity={:.3}",
            self.index, self.statistic, self.observed, self.lower, self.upper, self.severity
        )
    }
}

/// Stateless check of one policy; `None` means no drift detected (including
/// when the statistic is undefined or the baseline is invalid).
pub fn check_drift(tracker: &StreamingMoments, baseline_alpha: f64, policy: &DriftPolicy) -> Option<DriftAlert> {
    let expected = expected_moments(baseline_alpha).ok()?;
    let n = tracker.count();
    if n < policy.n_min.max(1) {
        return None;
    }
    match policy.statistic {
        Statistic::Mean => {
            let observed = tracker.mean()?;
            let allowed = policy.z * expected.std_dev / (n as f64).sqrt();
            let upper = baseline_alpha + allowed;
            (observed > upper).then(|| DriftAlert {
                index: n,
                statistic: Statistic::Mean,
                observed,
                lower: 0.0,
                upper,
                severity: (observed - baseline_alpha) / allowed,
            })
        }
        Statistic::Skew => {
            let observed = tracker.skewness()?;
            let allowed = policy.skew_fraction * expected.skew.abs();
            let deviation = (observed - expected.skew).abs();
            (deviation > allowed).then(|| DriftAlert {
                index: n,
                statistic: Statistic::Skew,
                observed,
                lower: expected.skew - allowed,
                upper: expected.skew + allowed,
                severity: if allowed > 0.0 {
                    deviation / allowed
                } else {
                    f64::INFINITY
                },
            })
        }
    }
}

/// Applies a set of policies over time, emitting one alert per crossing
/// episode: a policy re-arms only after its statistic returns inside the band.
#[derive(Debug, Clone)]
pub struct DriftMonitor {
    baseline_alpha: f64,
    policies: Vec<DriftPolicy>,
    active: Vec<bool>,
}

impl DriftMonitor {
    pub fn new(baseline_alpha: f64, policies: Vec<DriftPolicy>) -> Self {
        let active = vec![false; policies.len()];
        DriftMonitor {
            baseline_alpha,
            policies,
            active,
        }
    }

    pub fn observe(&mut self, tracker: &StreamingMoments) -> Vec<DriftAlert> {
        let mut alerts = Vec::new();
        for (policy, active) in self.policies.iter().zip(self.active.iter_mut()) {
            match check_drift(tracker, self.baseline_alpha, policy) {
                Some(alert) => {
                    if !*active {
                        alerts.push(alert);
                    }
                    *active = true;
                }
                None => *active = false,
            }
        }
        alerts
    }
}
