//! Core domain types shared by every pipeline stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth label of a sample from a class the model was never trained on.
pub const LABEL_UNKNOWN: i32 = -1;
/// Label of a deployment sample with no ground truth.
pub const LABEL_UNLABELED: i32 = -2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorId {
    Softmax,
    Gradient,
    Openmax,
    Mahalanobis,
    InputCluster,
    OutputCluster,
}

impl DetectorId {
    pub const ALL: [DetectorId; 6] = [
        DetectorId::Softmax,
        DetectorId::Gradient,
        DetectorId::Openmax,
        DetectorId::Mahalanobis,
        DetectorId::InputCluster,
        DetectorId::OutputCluster,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorId::Softmax => "softmax",
            DetectorId::Gradient => "gradient",
            DetectorId::Openmax => "openmax",
            DetectorId::Mahalanobis => "mahalanobis",
            DetectorId::InputCluster => "input-cluster",
            DetectorId::OutputCluster => "output-cluster",
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown detector `{s}`")))
    }
}

/// One model inference: activation vector (logits), feature vector and label.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRecord {
    pub sample_id: u64,
    /// Class id, or [`LABEL_UNKNOWN`] / [`LABEL_UNLABELED`].
    pub true_label: i32,
    pub logits: Vec<f32>,
    pub features: Vec<f32>,
    pub raw_input: Option<Vec<f32>>,
}

impl InferenceRecord {
    pub fn new(sample_id: u64, true_label: i32, logits: Vec<f32>, features: Vec<f32>) -> Self {
        InferenceRecord {
            sample_id,
            true_label,
            logits,
            features,
            raw_input: None,
        }
    }

    pub fn with_raw_input(mut self, raw_input: Vec<f32>) -> Self {
        self.raw_input = Some(raw_input);
        self
    }

    pub fn is_known(&self) -> bool {
        self.true_label >= 0
    }

    /// Index of the largest logit; the first one wins ties.
    pub fn predicted_class(&self) -> usize {
        argmax_f32(&self.logits)
    }

    /// Checks lengths and finiteness against a `(K, D)` shape.
    pub fn validate(&self, k: usize, d: usize) -> Result<()> {
        let check_len = |what, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    sample_id: self.sample_id,
                    what,
                    expected,
                    found,
                })
            }
        };
        check_len("logits", k, self.logits.len())?;
        check_len("features", d, self.features.len())?;
        if self.true_label < LABEL_UNLABELED {
            return Err(Error::Invariant(format!(
                "record {}: label {} is below the unlabeled sentinel",
                self.sample_id, self.true_label
            )));
        }
        let finite = self
            .logits
            .iter()
            .chain(&self.features)
            .chain(self.raw_input.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invariant(format!(
                "record {} contains a non-finite value",
                self.sample_id
            )));
        }
        Ok(())
    }
}

pub(crate) fn argmax_f32(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Last linear layer of the monitored model: `logits = W · features + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHead {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// Row-major `num_classes x feature_dim`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Maximum absolute difference between the two softmax distributions accepted by
/// [`ModelHead::check_consistency`].
pub const HEAD_CONSISTENCY_TOLERANCE: f64 = 1e-4;

impl ModelHead {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let head = ModelHead {
            num_classes: weights.len(),
            feature_dim: weights.first().map_or(0, Vec::len),
            weights,
            bias,
        };
        head.validate()?;
        Ok(head)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Invariant(format!(
                "model head needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.feature_dim < 1 {
            return Err(Error::Invariant("model head feature dimension is 0".into()));
        }
        if self.weights.len() != self.num_classes || self.bias.len() != self.num_classes {
            return Err(Error::Invariant(format!(
                "model head declares K={} but has {} weight rows and {} biases",
                self.num_classes,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if let Some(row) = self.weights.iter().position(|r| r.len() != self.feature_dim) {
            return Err(Error::Invariant(format!(
                "model head weight row {row} does not have length D={}",
                self.feature_dim
            )));
        }
        let finite = self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invariant("model head contains a non-finite value".into()));
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f32]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(features).map(|(w, &h)| w * f64::from(h)).sum::<f64>() + b)
            .collect()
    }

    /// Verifies that `softmax(W h + b)` reproduces `softmax(logits)` for a record.
    pub fn check_consistency(&self, record: &InferenceRecord) -> Result<()> {
        record.validate(self.num_classes, self.feature_dim)?;
        let from_head = crate::math::softmax(&self.logits(&record.features));
        let stored: Vec<f64> = record.logits.iter().map(|&v| f64::from(v)).collect();
        let from_record = crate::math::softmax(&stored);
        let worst = from_head
            .iter()
            .zip(&from_record)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if worst > HEAD_CONSISTENCY_TOLERANCE {
            return Err(Error::Invariant(format!(
                "record {}: softmax of W·h+b differs from softmax of stored logits by {worst:e}",
                record.sample_id
            )));
        }
        Ok(())
    }
}

/// Novelty score from one detector; higher means more likely unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsrScore {
    pub detector: DetectorId,
    pub value: f64,
    pub is_unknown: bool,
}

impl OsrScore {
    pub fn new(detector: DetectorId, value: f64, threshold: f64) -> Self {
        OsrScore {
            detector,
            value,
            is_unknown: value > threshold,
        }
    }
}
