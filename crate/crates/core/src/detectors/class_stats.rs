use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{DetectorId, InferenceRecord};

/// Per-class mean activation and feature vectors over correctly classified samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub class: usize,
    pub count: u64,
    pub mean_av: Vec<f64>,
    pub mean_fv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStatistics {
    pub detector: DetectorId,
    /// Sorted by class id; classes absent from the fit data have no entry.
    pub classes: Vec<ClassMeans>,
}

impl ClassStatistics {
    pub fn get(&self, class: usize) -> Option<&ClassMeans> {
        self.classes
            .binary_search_by_key(&class, |c| c.class)
            .ok()
            .map(|i| &self.classes[i])
    }

    pub fn validate(&self, num_classes: usize, feature_dim: usize) -> Result<()> {
        for pair in self.classes.windows(2) {
            if pair[0].class >= pair[1].class {
                return Err(Error::Invariant("class statistics are not sorted by class".into()));
            }
        }
        for c in &self.classes {
            if c.class >= num_classes {
                return Err(Error::Invariant(format!("class statistics for class {} >= K", c.class)));
            }
            if c.count < 1 {
                return Err(Error::Invariant(format!("class {} has count 0", c.class)));
            }
            if c.mean_av.len() != num_classes || c.mean_fv.len() != feature_dim {
                return Err(Error::Invariant(format!(
                    "class {} mean vectors have wrong length",
                    c.class
                )));
            }
            if !c.mean_av.iter().chain(&c.mean_fv).all(|v| v.is_finite()) {
                return Err(Error::Invariant(format!("class {} means are not finite", c.class)));
            }
        }
        Ok(())
    }
}

/// Means over records whose prediction matches their (known) label.
///
/// A class that appears in the fit data but is never predicted correctly is an error.
pub fn fit_class_statistics<'a, I>(fit_records: I, num_classes: usize, feature_dim: usize) -> Result<ClassStatistics>
where
    I: IntoIterator<Item = &'a InferenceRecord>,
{
    let (k, d) = (num_classes, feature_dim);
    let mut seen = vec![false; k];
    let mut counts = vec![0u64; k];
    let mut sum_av = vec![vec![0.0f64; k]; k];
    let mut sum_fv = vec![vec![0.0f64; d]; k];
    for record in fit_records {
        record.validate(k, d)?;
        if record.true_label < 0 {
            continue;
        }
        let label = record.true_label as usize;
        if label >= k {
            return Err(Error::InvalidInput(format!(
                "record {}: label {label} is outside the model's {k} classes",
                record.sample_id
            )));
        }
        seen[label] = true;
        if record.predicted_class() != label {
            continue;
        }
        counts[label] += 1;
        for (s, &v) in sum_av[label].iter_mut().zip(&record.logits) {
            *s += f64::from(v);
        }
        for (s, &v) in sum_fv[label].iter_mut().zip(&record.features) {
            *s += f64::from(v);
        }
    }
    let mut classes = Vec::new();
    for class in 0..k {
        if !seen[class] {
            continue;
        }
        let n = counts[class];
        if n == 0 {
            return Err(Error::fit(
                DetectorId::Openmax,
                format!("class {class} has no correctly classified fit sample"),
            ));
        }
        let scale = 1.0 / n as f64;
        classes.push(ClassMeans {
            class,
            count: n,
            mean_av: sum_av[class].iter().map(|s| s * scale).collect(),
            mean_fv: sum_fv[class].iter().map(|s| s * scale).collect(),
        });
    }
    if classes.is_empty() {
        return Err(Error::fit(DetectorId::Openmax, "no labeled known-class fit records"));
    }
    Ok(ClassStatistics {
        detector: DetectorId::Openmax,
        classes,
    })
}
