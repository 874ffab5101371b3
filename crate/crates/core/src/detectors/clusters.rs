//! Distance-to-nearest-centroid scores, either on raw inputs or on
//! PCA-projected penultimate features.

use serde::{Deserialize, Serialize};

use crate::detectors::kmeans::kmeans;
use crate::detectors::pca::{fit_pca, orthonormality_error, project};
use crate::error::{Error, Result};
use crate::math::{min_distance, squared_distance_f32, to_f64};
use crate::record::{DetectorId, InferenceRecord, OsrScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputClusterParams {
    pub detector: DetectorId,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
}

impl InputClusterParams {
    pub fn validate(&self) -> Result<()> {
        validate_centroids(&self.centroids, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputClusterParams {
    pub detector: DetectorId,
    pub seed: u64,
    pub retained_variance: f64,
    pub mean: Vec<f64>,
    /// `d` orthonormal directions of length D.
    pub components: Vec<Vec<f64>>,
    /// Centroids in the projected space.
    pub centroids: Vec<Vec<f64>>,
}

impl OutputClusterParams {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        if self.mean.len() != feature_dim || self.components.iter().any(|c| c.len() != feature_dim) {
            return Err(Error::Invariant(
                "PCA basis does not match the feature dimension".into(),
            ));
        }
        if self.components.is_empty() || self.components.len() > feature_dim {
            return Err(Error::Invariant("PCA basis must have 1..=D components".into()));
        }
        let err = orthonormality_error(&self.components);
        if err.is_nan() || err > 1e-8 {
            return Err(Error::Invariant(format!(
                "PCA basis is not orthonormal (error {err:e})"
            )));
        }
        validate_centroids(&self.centroids, Some(self.components.len()))
    }

    pub fn project(&self, features: &[f32]) -> Vec<f64> {
        project(&self.mean, &self.components, &to_f64(features))
    }
}

fn validate_centroids(centroids: &[Vec<f64>], dim: Option<usize>) -> Result<()> {
    let Some(first) = centroids.first() else {
        return Err(Error::Invariant("no centroids".into()));
    };
    let dim = dim.unwrap_or(first.len());
    if dim == 0 || centroids.iter().any(|c| c.len() != dim) {
        return Err(Error::Invariant("centroids have inconsistent dimensions".into()));
    }
    if !centroids.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::Invariant("centroids are not finite".into()));
    }
    Ok(())
}

fn known<'a, I>(records: I) -> impl Iterator<Item = &'a InferenceRecord>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
{
    records.into_iter().filter(|r| r.true_label >= 0)
}

/// k-means on the raw inputs of the known-class fit records.
pub fn fit_input_clusters<'a, I>(
    fit_records: I,
    n_clusters: usize,
    seed: u64,
    restarts: usize,
) -> Result<InputClusterParams>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
{
    let fail = |m: String| Error::fit(DetectorId::InputCluster, m);
    let mut points = Vec::new();
    for r in known(fit_records) {
        let raw = r
            .raw_input
            .as_ref()
            .ok_or_else(|| fail(format!("record {} has no raw input", r.sample_id)))?;
        if points.first().is_some_and(|p: &Vec<f64>| p.len() != raw.len()) {
            return Err(fail(format!("record {} raw input length differs", r.sample_id)));
        }
        points.push(to_f64(raw));
    }
    if points.is_empty() {
        return Err(fail("no known-class fit records".into()));
    }
    let fit = kmeans(&points, n_clusters, seed, restarts).map_err(|e| fail(e.to_string()))?;
    Ok(InputClusterParams {
        detector: DetectorId::InputCluster,
        seed,
        centroids: fit.centroids,
    })
}

pub fn score_input_cluster(record: &InferenceRecord, params: &InputClusterParams, threshold: f64) -> Result<OsrScore> {
    let raw = record
        .raw_input
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("record {} has no raw input", record.sample_id)))?;
    if raw.len() != params.centroids[0].len() {
        return Err(Error::DimensionMismatch {
            sample_id: record.sample_id,
            what: "raw_input",
            expected: params.centroids[0].len(),
            found: raw.len(),
        });
    }
    let value = params
        .centroids
        .iter()
        .map(|c| squared_distance_f32(raw, c))
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    Ok(OsrScore::new(DetectorId::InputCluster, value, threshold))
}

/// PCA on the known-class features, then k-means in the projected space.
pub fn fit_output_clusters<'a, I>(
    fit_records: I,
    feature_dim: usize,
    n_clusters: usize,
    retained_variance: f64,
    seed: u64,
    restarts: usize,
) -> Result<OutputClusterParams>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
{
    let fail = |m: String| Error::fit(DetectorId::OutputCluster, m);
    let features: Vec<Vec<f64>> = known(fit_records)
        .map(|r| {
            if r.features.len() == feature_dim {
                Ok(to_f64(&r.features))
            } else {
                Err(fail(format!("record {} has wrong feature length", r.sample_id)))
            }
        })
        .collect::<Result<_>>()?;
    let pca = fit_pca(&features, retained_variance).map_err(|e| fail(e.to_string()))?;
    let projected: Vec<Vec<f64>> = features.iter().map(|x| pca.project(x)).collect();
    let fit = kmeans(&projected, n_clusters, seed, restarts).map_err(|e| fail(e.to_string()))?;
    Ok(OutputClusterParams {
        detector: DetectorId::OutputCluster,
        seed,
        retained_variance,
        mean: pca.mean,
        components: pca.components,
        centroids: fit.centroids,
    })
}

pub fn score_output_cluster(
    record: &InferenceRecord,
    params: &OutputClusterParams,
    threshold: f64,
) -> Result<OsrScore> {
    if record.features.len() != params.mean.len() {
        return Err(Error::DimensionMismatch {
            sample_id: record.sample_id,
            what: "features",
            expected: params.mean.len(),
            found: record.features.len(),
        });
    }
    let value = min_distance(&params.project(&record.features), &params.centroids);
    Ok(OsrScore::new(DetectorId::OutputCluster, value, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_raw(id: u64, raw: Vec<f32>) -> InferenceRecord {
        InferenceRecord::new(id, 0, vec![1.0, 0.0], vec![0.0]).with_raw_input(raw)
    }

    #[test]
    fn input_cluster_geometry() {
        let params = InputClusterParams {
            detector: DetectorId::InputCluster,
            seed: 0,
            centroids: vec![vec![0.0, 0.0]],
        };
        let s = score_input_cluster(&with_raw(0, vec![3.0, 4.0]), &params, 4.0).unwrap();
        assert_eq!(s.value, 5.0);
        assert!(s.is_unknown);
        let s = score_input_cluster(&with_raw(0, vec![0.0, 0.0]), &params, 4.0).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn missing_raw_input() {
        let params = InputClusterParams {
            detector: DetectorId::InputCluster,
            seed: 0,
            centroids: vec![vec![0.0]],
        };
        let r = InferenceRecord::new(0, 0, vec![1.0, 0.0], vec![0.0]);
        assert!(score_input_cluster(&r, &params, 0.0).is_err());
        let err = fit_input_clusters([&r], 1, 0, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::Fit {
                detector: DetectorId::InputCluster,
                ..
            }
        ));
    }

    #[test]
    fn output_cluster_hits_centroid() {
        let params = OutputClusterParams {
            detector: DetectorId::OutputCluster,
            seed: 0,
            retained_variance: 0.95,
            mean: vec![1.0, 1.0],
            components: vec![vec![1.0, 0.0]],
            centroids: vec![vec![2.0], vec![-1.0]],
        };
        params.validate(2).unwrap();
        let r = InferenceRecord::new(0, 0, vec![1.0, 0.0], vec![3.0, 7.0]);
        assert_eq!(score_output_cluster(&r, &params, 0.0).unwrap().value, 0.0);
        let r = InferenceRecord::new(0, 0, vec![1.0, 0.0], vec![4.5, -7.0]);
        assert_eq!(score_output_cluster(&r, &params, 0.0).unwrap().value, 1.5);
    }
}
