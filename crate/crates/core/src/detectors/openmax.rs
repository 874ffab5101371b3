//! OpenMax: Weibull-weighted revision of the activation vector with a
//! synthetic unknown class.
//!
//! For the `revision_rank` top classes (rank `r = 1..=alpha`), the revision
//! weight is `w_c = cdf_c(||v - mav_c||) * (alpha - r + 1) / alpha`. Known
//! activations become `v_c * (1 - w_c)` and the unknown activation is
//! `sum_c v_c * w_c`. The score is the unknown entry of the softmax over the
//! `K + 1` revised activations. When every weight is zero no mass is moved and
//! the unknown class is left out, so the known distribution is the plain
//! softmax and the score is exactly 0.

use serde::{Deserialize, Serialize};

use crate::detectors::class_stats::ClassStatistics;
use crate::detectors::weibull::{fit_weibull_tail, WeibullModel};
use crate::error::{Error, Result};
use crate::math::squared_distance_f32;
use crate::record::{DetectorId, InferenceRecord, OsrScore};

pub const DEFAULT_TAIL_SIZE: usize = 20;
pub const DEFAULT_MAX_REVISION_RANK: usize = 10;

pub fn default_revision_rank(num_classes: usize) -> usize {
    DEFAULT_MAX_REVISION_RANK.min(num_classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeibull {
    pub class: usize,
    #[serde(flatten)]
    pub model: WeibullModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenMaxParams {
    pub detector: DetectorId,
    pub tail_size: usize,
    pub revision_rank: usize,
    /// Sorted by class id.
    pub models: Vec<ClassWeibull>,
}

impl OpenMaxParams {
    pub fn get(&self, class: usize) -> Option<&WeibullModel> {
        self.models
            .binary_search_by_key(&class, |m| m.class)
            .ok()
            .map(|i| &self.models[i].model)
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.revision_rank < 1 || self.revision_rank > num_classes {
            return Err(Error::Invariant(format!(
                "revision rank {} outside 1..={num_classes}",
                self.revision_rank
            )));
        }
        if self.tail_size < 3 {
            return Err(Error::Invariant(format!("tail size {} < 3", self.tail_size)));
        }
        for pair in self.models.windows(2) {
            if pair[0].class >= pair[1].class {
                return Err(Error::Invariant("Weibull models are not sorted by class".into()));
            }
        }
        for m in &self.models {
            if m.class >= num_classes {
                return Err(Error::Invariant(format!("Weibull model for class {} >= K", m.class)));
            }
            m.model.validate()?;
        }
        Ok(())
    }
}

/// Fits one Weibull tail per class on the distances between the activation
/// vectors of correctly classified fit samples and their class mean.
pub fn fit_openmax<'a, I>(
    fit_records: I,
    stats: &ClassStatistics,
    num_classes: usize,
    tail_size: usize,
    revision_rank: usize,
) -> Result<OpenMaxParams>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
{
    if revision_rank < 1 || revision_rank > num_classes {
        return Err(Error::fit(
            DetectorId::Openmax,
            format!("revision rank {revision_rank} outside 1..={num_classes}"),
        ));
    }
    let mut distances: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
    for record in fit_records {
        if record.true_label < 0 {
            continue;
        }
        let class = record.true_label as usize;
        if class >= num_classes || record.predicted_class() != class {
            continue;
        }
        if let Some(means) = stats.get(class) {
            distances[class].push(squared_distance_f32(&record.logits, &means.mean_av).sqrt());
        }
    }
    let mut models = Vec::new();
    for means in &stats.classes {
        let d = &distances[means.class];
        if d.len() < 3 {
            return Err(Error::fit(
                DetectorId::Openmax,
                format!(
                    "class {} has {} correct fit samples, need at least 3",
                    means.class,
                    d.len()
                ),
            ));
        }
        let eta = tail_size.min(d.len());
        if eta < tail_size {
            log::warn!(
                "openmax: class {} has only {} correct samples; tail size reduced from {tail_size}",
                means.class,
                d.len()
            );
        }
        let model = fit_weibull_tail(d, eta)
            .map_err(|e| Error::fit(DetectorId::Openmax, format!("class {}: {e}", means.class)))?;
        models.push(ClassWeibull {
            class: means.class,
            model,
        });
    }
    Ok(OpenMaxParams {
        detector: DetectorId::Openmax,
        tail_size,
        revision_rank,
        models,
    })
}

/// Indices of the `count` largest logits, best first; lower index wins ties.
fn top_classes(logits: &[f32], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    let cmp = |a: &usize, b: &usize| logits[*b].total_cmp(&logits[*a]).then(a.cmp(b));
    if count < order.len() {
        order.select_nth_unstable_by(count, cmp);
        order.truncate(count);
    }
    order.sort_by(cmp);
    order
}

/// Revises activations given the Weibull CDF value of each ranked class.
///
/// `ranked` lists `(class, cdf)` best first. Returns the `K + 1` probabilities,
/// unknown last.
pub fn revise(logits: &[f32], ranked: &[(usize, f64)]) -> Vec<f64> {
    let alpha = ranked.len() as f64;
    let mut revised: Vec<f64> = logits.iter().map(|&v| f64::from(v)).collect();
    let mut unknown = 0.0;
    let mut any_weight = false;
    for (r, &(class, cdf)) in ranked.iter().enumerate() {
        let weight = cdf * (alpha - r as f64) / alpha;
        if weight > 0.0 {
            any_weight = true;
        }
        let v = f64::from(logits[class]);
        revised[class] = v * (1.0 - weight);
        unknown += v * weight;
    }
    let unknown = if any_weight { unknown } else { f64::NEG_INFINITY };
    let max = revised.iter().copied().fold(unknown, f64::max);
    let mut probs: Vec<f64> = revised.iter().map(|v| (v - max).exp()).collect();
    probs.push((unknown - max).exp());
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// Revised `K + 1` distribution of a record, unknown class last.
pub fn openmax_probabilities(
    record: &InferenceRecord,
    stats: &ClassStatistics,
    params: &OpenMaxParams,
) -> Result<Vec<f64>> {
    let alpha = params.revision_rank.min(record.logits.len());
    let ranked = top_classes(&record.logits, alpha)
        .into_iter()
        .map(|class| {
            let (Some(model), Some(means)) = (params.get(class), stats.get(class)) else {
                return Err(Error::Coverage {
                    detector: DetectorId::Openmax,
                    message: format!("no Weibull model for top-ranked class {class}"),
                });
            };
            let dist = squared_distance_f32(&record.logits, &means.mean_av).sqrt();
            Ok((class, model.cdf(dist)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(revise(&record.logits, &ranked))
}

pub fn score_openmax(
    record: &InferenceRecord,
    stats: &ClassStatistics,
    params: &OpenMaxParams,
    threshold: f64,
) -> Result<OsrScore> {
    let probs = openmax_probabilities(record, stats, params)?;
    Ok(OsrScore::new(DetectorId::Openmax, probs[probs.len() - 1], threshold))
}
