//! Minimum class-conditional Mahalanobis distance on penultimate features,
//! with one covariance shared by all classes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{DetectorId, InferenceRecord, OsrScore};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCenter {
    pub class: usize,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisParams {
    pub detector: DetectorId,
    pub epsilon: f64,
    pub means: Vec<ClassCenter>,
    /// Inverse of the regularized shared covariance, row-major `D x D`.
    pub precision: Vec<Vec<f64>>,
}

impl MahalanobisParams {
    pub fn feature_dim(&self) -> usize {
        self.precision.len()
    }

    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        let d = feature_dim;
        if self.precision.len() != d || self.precision.iter().any(|r| r.len() != d) {
            return Err(Error::Invariant(format!("precision matrix is not {d}x{d}")));
        }
        if self.means.is_empty() || self.means.iter().any(|m| m.mean.len() != d) {
            return Err(Error::Invariant(
                "Mahalanobis class means missing or wrong length".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Invariant(format!("bad regularizer {}", self.epsilon)));
        }
        let m = DMatrix::from_fn(d, d, |i, j| self.precision[i][j]);
        if !m
            .iter()
            .chain(self.means.iter().flat_map(|c| &c.mean))
            .all(|v| v.is_finite())
        {
            return Err(Error::Invariant("Mahalanobis parameters are not finite".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (&m - m.transpose()).amax() > 1e-9 * scale {
            return Err(Error::Invariant("precision matrix is not symmetric".into()));
        }
        if m.cholesky().is_none() {
            return Err(Error::Invariant("precision matrix is not positive definite".into()));
        }
        Ok(())
    }

    /// `min_c sqrt((h - mu_c)^T P (h - mu_c))`.
    pub fn distance(&self, features: &[f32]) -> f64 {
        let mut diff = vec![0.0; features.len()];
        let mut best = f64::INFINITY;
        for center in &self.means {
            for ((d, &h), m) in diff.iter_mut().zip(features).zip(&center.mean) {
                *d = f64::from(h) - m;
            }
            let q: f64 = self
                .precision
                .iter()
                .zip(&diff)
                .map(|(row, di)| di * row.iter().zip(&diff).map(|(p, dj)| p * dj).sum::<f64>())
                .sum();
            best = best.min(q.max(0.0));
        }
        best.sqrt()
    }
}

/// Class means plus the inverse of the pooled within-class covariance
/// `sum_c sum_i (h_i - mu_c)(h_i - mu_c)^T / (N - C)`, regularized by
/// `epsilon * trace / D` on the diagonal.
pub fn fit_mahalanobis<'a, I>(fit_records: I, feature_dim: usize, epsilon: f64) -> Result<MahalanobisParams>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
{
    let fail = |m: String| Error::fit(DetectorId::Mahalanobis, m);
    let d = feature_dim;
    let labeled: Vec<&InferenceRecord> = fit_records.into_iter().filter(|r| r.true_label >= 0).collect();
    for r in &labeled {
        if r.features.len() != d {
            return Err(Error::DimensionMismatch {
                sample_id: r.sample_id,
                what: "features",
                expected: d,
                found: r.features.len(),
            });
        }
    }
    let n = labeled.len();
    if n < d + 1 {
        return Err(fail(format!("need at least D+1 = {} labeled samples, got {n}", d + 1)));
    }

    let max_class = labeled.iter().map(|r| r.true_label as usize).max().unwrap_or(0);
    let mut sums = vec![vec![0.0f64; d]; max_class + 1];
    let mut counts = vec![0usize; max_class + 1];
    for r in &labeled {
        let c = r.true_label as usize;
        counts[c] += 1;
        for (s, &h) in sums[c].iter_mut().zip(&r.features) {
            *s += f64::from(h);
        }
    }
    let means: Vec<ClassCenter> = (0..=max_class)
        .filter(|&c| counts[c] > 0)
        .map(|c| ClassCenter {
            class: c,
            mean: sums[c].iter().map(|s| s / counts[c] as f64).collect(),
        })
        .collect();
    let num_classes = means.len();
    if n <= num_classes {
        return Err(fail(format!(
            "{n} samples over {num_classes} classes leaves no degrees of freedom"
        )));
    }
    let mut mean_of = vec![None; max_class + 1];
    for (i, c) in means.iter().enumerate() {
        mean_of[c.class] = Some(i);
    }

    let mut scatter = DMatrix::<f64>::zeros(d, d);
    let mut diff = nalgebra::DVector::<f64>::zeros(d);
    for r in &labeled {
        let mean = &means[mean_of[r.true_label as usize].unwrap()].mean;
        for (j, (&h, m)) in r.features.iter().zip(mean).enumerate() {
            diff[j] = f64::from(h) - m;
        }
        scatter.syger(1.0, &diff, &diff, 1.0);
    }
    // syger only fills the lower triangle
    scatter.fill_upper_triangle_with_lower_triangle();
    let mut cov = scatter / (n - num_classes) as f64;
    let ridge = epsilon * cov.trace() / d as f64;
    for i in 0..d {
        cov[(i, i)] += ridge;
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("shared covariance is singular after regularization".into()))?;
    let inv = chol.inverse();
    let precision = (0..d)
        .map(|i| (0..d).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)])).collect())
        .collect();
    Ok(MahalanobisParams {
        detector: DetectorId::Mahalanobis,
        epsilon,
        means,
        precision,
    })
}

pub fn score_mahalanobis(record: &InferenceRecord, params: &MahalanobisParams, threshold: f64) -> Result<OsrScore> {
    if record.features.len() != params.feature_dim() {
        return Err(Error::DimensionMismatch {
            sample_id: record.sample_id,
            what: "features",
            expected: params.feature_dim(),
            found: record.features.len(),
        });
    }
    Ok(OsrScore::new(
        DetectorId::Mahalanobis,
        params.distance(&record.features),
        threshold,
    ))
}
