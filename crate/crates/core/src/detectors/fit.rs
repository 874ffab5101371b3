use crate::bundle::DetectorBundle;
use crate::detectors::mahalanobis::DEFAULT_EPSILON;
use crate::detectors::openmax::{default_revision_rank, DEFAULT_TAIL_SIZE};
use crate::detectors::pca::DEFAULT_RETAINED_VARIANCE;
use crate::detectors::threshold::DEFAULT_TARGET_FPR;
use crate::detectors::{
    calibrate_threshold, fit_class_statistics, fit_input_clusters, fit_mahalanobis, fit_openmax, fit_output_clusters,
};
use crate::error::{Error, Result};
use crate::record::{DetectorId, InferenceRecord, ModelHead};

/// Hyper-parameters for [`fit_bundle`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub detectors: Vec<DetectorId>,
    pub tail_size: usize,
    /// Defaults to `min(10, K)`.
    pub revision_rank: Option<usize>,
    pub epsilon: f64,
    /// Defaults to the number of known classes.
    pub n_clusters: Option<usize>,
    pub retained_variance: f64,
    pub target_fpr: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            detectors: DetectorId::ALL.to_vec(),
            tail_size: DEFAULT_TAIL_SIZE,
            revision_rank: None,
            epsilon: DEFAULT_EPSILON,
            n_clusters: None,
            retained_variance: DEFAULT_RETAINED_VARIANCE,
            target_fpr: DEFAULT_TARGET_FPR,
            seed: 0,
            restarts: 1,
        }
    }
}

/// Fits the selected detectors on known-class records and calibrates each
/// threshold at `target_fpr` on the known records of `calibration` (the fit
/// records when `None`).
///
/// When a model head is given it is stored in the bundle and checked against
/// every fit record.
pub fn fit_bundle(
    fit_records: &[InferenceRecord],
    num_classes: usize,
    feature_dim: usize,
    head: Option<&ModelHead>,
    calibration: Option<&[InferenceRecord]>,
    config: &FitConfig,
) -> Result<DetectorBundle> {
    if num_classes < 2 {
        return Err(Error::Invariant(format!("need K >= 2, got {num_classes}")));
    }
    for r in fit_records {
        r.validate(num_classes, feature_dim)?;
    }
    if let Some(head) = head {
        head.validate()?;
        if head.num_classes != num_classes || head.feature_dim != feature_dim {
            return Err(Error::Invariant("model head shape differs from the records".into()));
        }
        for r in fit_records {
            head.check_consistency(r)?;
        }
    }
    let mut bundle = DetectorBundle::new(num_classes, feature_dim);
    bundle.model_head = head.cloned();

    let mut detectors = config.detectors.clone();
    detectors.sort();
    detectors.dedup();
    let known_classes = {
        let mut seen = vec![false; num_classes];
        for r in fit_records.iter().filter(|r| r.true_label >= 0) {
            if let Some(s) = seen.get_mut(r.true_label as usize) {
                *s = true;
            }
        }
        seen.iter().filter(|&&s| s).count()
    };
    let n_clusters = config.n_clusters.unwrap_or(known_classes.max(1));

    for &det in &detectors {
        match det {
            DetectorId::Softmax | DetectorId::Gradient => {}
            DetectorId::Openmax => {
                let stats = fit_class_statistics(fit_records, num_classes, feature_dim)?;
                let rank = config.revision_rank.unwrap_or(default_revision_rank(num_classes));
                bundle.openmax = Some(fit_openmax(fit_records, &stats, num_classes, config.tail_size, rank)?);
                bundle.class_stats = Some(stats);
            }
            DetectorId::Mahalanobis => {
                bundle.mahalanobis = Some(fit_mahalanobis(fit_records, feature_dim, config.epsilon)?);
            }
            DetectorId::InputCluster => {
                bundle.input_clusters = Some(fit_input_clusters(
                    fit_records,
                    n_clusters,
                    config.seed,
                    config.restarts,
                )?);
            }
            DetectorId::OutputCluster => {
                bundle.output_clusters = Some(fit_output_clusters(
                    fit_records,
                    feature_dim,
                    n_clusters,
                    config.retained_variance,
                    config.seed,
                    config.restarts,
                )?);
            }
        }
    }

    let calibration = calibration.unwrap_or(fit_records);
    for &det in &detectors {
        let scores = calibration
            .iter()
            .filter(|r| r.true_label >= 0)
            .map(|r| bundle.score_value(det, r))
            .collect::<Result<Vec<f64>>>()?;
        let threshold = calibrate_threshold(&scores, config.target_fpr)
            .map_err(|e| Error::fit(det, format!("threshold calibration: {e}")))?;
        bundle.thresholds.insert(det, threshold);
    }
    bundle.validate()?;
    Ok(bundle)
}
