//! Fitted detector parameters and their text file format.
//!
//! A bundle is a TOML document. `[meta]` and `[thresholds]` are required; every
//! other section is present only for the detectors that were fitted. Floats
//! are written in shortest round-trip form, so `load(save(b)) == b` exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::softmax::{gradient_value, max_softmax_value};
use crate::detectors::{
    score_input_cluster, score_mahalanobis, score_openmax, score_output_cluster, ClassStatistics, InputClusterParams,
    MahalanobisParams, OpenMaxParams, OutputClusterParams,
};
use crate::error::{Error, Result};
use crate::record::{DetectorId, InferenceRecord, ModelHead, OsrScore};
use crate::tracking::TrackerState;

pub const BUNDLE_FORMAT: &str = "osrmon-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    pub format: String,
    pub version: u32,
    pub num_classes: usize,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorBundle {
    pub meta: BundleMeta,
    pub thresholds: BTreeMap<DetectorId, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_head: Option<ModelHead>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_stats: Option<ClassStatistics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub openmax: Option<OpenMaxParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mahalanobis: Option<MahalanobisParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_clusters: Option<InputClusterParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_clusters: Option<OutputClusterParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<TrackerState>,
}

fn check_tag(found: DetectorId, expected: DetectorId, section: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Invariant(format!(
            "section [{section}] is tagged `{found}`, expected `{expected}`"
        )));
    }
    Ok(())
}

fn require<'a, T>(section: &'a Option<T>, detector: DetectorId, name: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| Error::Coverage {
        detector,
        message: format!("missing [{name}] section"),
    })
}

impl DetectorBundle {
    /// An empty bundle for a `(K, D)` model.
    pub fn new(num_classes: usize, feature_dim: usize) -> Self {
        DetectorBundle {
            meta: BundleMeta {
                format: BUNDLE_FORMAT.into(),
                version: BUNDLE_VERSION,
                num_classes,
                feature_dim,
            },
            thresholds: BTreeMap::new(),
            model_head: None,
            class_stats: None,
            openmax: None,
            mahalanobis: None,
            input_clusters: None,
            output_clusters: None,
            tracker: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.meta.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.meta.feature_dim
    }

    pub fn detectors(&self) -> impl Iterator<Item = DetectorId> + '_ {
        self.thresholds.keys().copied()
    }

    pub fn threshold(&self, detector: DetectorId) -> Result<f64> {
        self.thresholds.get(&detector).copied().ok_or_else(|| Error::Coverage {
            detector,
            message: "no threshold in bundle".into(),
        })
    }

    /// Checks every invariant of the bundle and that each thresholded detector
    /// has the fitted sections it needs.
    pub fn validate(&self) -> Result<()> {
        let (k, d) = (self.meta.num_classes, self.meta.feature_dim);
        if self.meta.format != BUNDLE_FORMAT {
            return Err(Error::Schema(format!("unknown bundle format `{}`", self.meta.format)));
        }
        if self.meta.version != BUNDLE_VERSION {
            return Err(Error::Schema(format!(
                "unsupported bundle version {}",
                self.meta.version
            )));
        }
        if k < 2 || d < 1 {
            return Err(Error::Invariant(format!(
                "bundle shape K={k}, D={d} needs K >= 2 and D >= 1"
            )));
        }
        for (det, t) in &self.thresholds {
            if !t.is_finite() {
                return Err(Error::Invariant(format!("threshold for {det} is not finite")));
            }
        }
        if let Some(head) = &self.model_head {
            head.validate()?;
            if head.num_classes != k || head.feature_dim != d {
                return Err(Error::Invariant("model head shape differs from bundle meta".into()));
            }
        }
        if let Some(stats) = &self.class_stats {
            check_tag(stats.detector, DetectorId::Openmax, "class_stats")?;
            stats.validate(k, d)?;
        }
        if let Some(om) = &self.openmax {
            check_tag(om.detector, DetectorId::Openmax, "openmax")?;
            om.validate(k)?;
        }
        if let Some(m) = &self.mahalanobis {
            check_tag(m.detector, DetectorId::Mahalanobis, "mahalanobis")?;
            m.validate(d)?;
        }
        if let Some(c) = &self.input_clusters {
            check_tag(c.detector, DetectorId::InputCluster, "input_clusters")?;
            c.validate()?;
        }
        if let Some(c) = &self.output_clusters {
            check_tag(c.detector, DetectorId::OutputCluster, "output_clusters")?;
            c.validate(d)?;
        }
        if let Some(t) = &self.tracker {
            t.validate()?;
        }
        for det in self.detectors() {
            let covered = match det {
                DetectorId::Softmax | DetectorId::Gradient => true,
                DetectorId::Openmax => self.class_stats.is_some() && self.openmax.is_some(),
                DetectorId::Mahalanobis => self.mahalanobis.is_some(),
                DetectorId::InputCluster => self.input_clusters.is_some(),
                DetectorId::OutputCluster => self.output_clusters.is_some(),
            };
            if !covered {
                return Err(Error::Schema(format!(
                    "threshold for {det} but its fitted parameters are missing"
                )));
            }
        }
        Ok(())
    }

    /// Raw score value, independent of any threshold.
    pub fn score_value(&self, detector: DetectorId, record: &InferenceRecord) -> Result<f64> {
        let (k, d) = (self.meta.num_classes, self.meta.feature_dim);
        if record.logits.len() != k {
            return Err(Error::DimensionMismatch {
                sample_id: record.sample_id,
                what: "logits",
                expected: k,
                found: record.logits.len(),
            });
        }
        if record.features.len() != d {
            return Err(Error::DimensionMismatch {
                sample_id: record.sample_id,
                what: "features",
                expected: d,
                found: record.features.len(),
            });
        }
        Ok(match detector {
            DetectorId::Softmax => max_softmax_value(&record.logits),
            DetectorId::Gradient => gradient_value(&record.logits, &record.features),
            DetectorId::Openmax => {
                let stats = require(&self.class_stats, detector, "class_stats")?;
                let params = require(&self.openmax, detector, "openmax")?;
                score_openmax(record, stats, params, f64::INFINITY)?.value
            }
            DetectorId::Mahalanobis => {
                let params = require(&self.mahalanobis, detector, "mahalanobis")?;
                score_mahalanobis(record, params, f64::INFINITY)?.value
            }
            DetectorId::InputCluster => {
                let params = require(&self.input_clusters, detector, "input_clusters")?;
                score_input_cluster(record, params, f64::INFINITY)?.value
            }
            DetectorId::OutputCluster => {
                let params = require(&self.output_clusters, detector, "output_clusters")?;
                score_output_cluster(record, params, f64::INFINITY)?.value
            }
        })
    }

    /// Scores a record and applies the bundle's threshold for `detector`.
    pub fn score(&self, detector: DetectorId, record: &InferenceRecord) -> Result<OsrScore> {
        let threshold = self.threshold(detector)?;
        Ok(OsrScore::new(detector, self.score_value(detector, record)?, threshold))
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(format!("cannot serialize bundle: {e}")))
    }

    /// Parses and validates a bundle.
    pub fn from_text(text: &str) -> Result<Self> {
        let bundle: DetectorBundle = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &DetectorBundle, path: impl AsRef<Path>) -> Result<()> {
    bundle.validate()?;
    fs::write(path, bundle.to_text()?)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<DetectorBundle> {
    DetectorBundle::from_text(&fs::read_to_string(path)?)
}

/// Head-only document: a single `[model_head]` table, the same layout as in a bundle.
#[derive(Serialize)]
struct HeadDocument<'a> {
    model_head: &'a ModelHead,
}

pub fn model_head_to_text(head: &ModelHead) -> Result<String> {
    toml::to_string(&HeadDocument { model_head: head })
        .map_err(|e| Error::Schema(format!("cannot serialize model head: {e}")))
}

/// Reads the `[model_head]` table of a head-only file or of a full bundle.
pub fn model_head_from_text(text: &str) -> Result<ModelHead> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
    let value = table
        .remove("model_head")
        .ok_or_else(|| Error::Schema("no [model_head] table".into()))?;
    let head: ModelHead = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::Schema(e.message().to_string()))?;
    head.validate()?;
    Ok(head)
}

pub fn load_model_head(path: impl AsRef<Path>) -> Result<ModelHead> {
    model_head_from_text(&fs::read_to_string(path)?)
}
