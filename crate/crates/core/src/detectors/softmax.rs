//! Maximum-softmax-probability and last-layer gradient scores.
//!
//! Both scores only need the exponentials of the logits relative to the top
//! logit, so they are computed in one pass without allocating.

use crate::error::{Error, Result};
use crate::math::norm_f32;
use crate::record::{DetectorId, InferenceRecord, ModelHead, OsrScore};

/// Sums over the non-top classes of `exp(z_c - z_max)` and its square.
struct TailSums {
    rest: f64,
    rest_sq: f64,
}

fn tail_sums(logits: &[f32]) -> TailSums {
    let top = crate::record::argmax_f32(logits);
    let max = f64::from(logits[top]);
    let (mut rest, mut rest_sq) = (0.0, 0.0);
    for (c, &z) in logits.iter().enumerate() {
        if c != top {
            let e = (f64::from(z) - max).exp();
            rest += e;
            rest_sq += e * e;
        }
    }
    TailSums { rest, rest_sq }
}

/// `1 - max_c softmax(logits)_c`.
pub fn max_softmax_value(logits: &[f32]) -> f64 {
    let TailSums { rest, .. } = tail_sums(logits);
    // 1 - 1/(1 + rest) without cancellation
    rest / (1.0 + rest)
}

pub fn score_max_softmax(record: &InferenceRecord, threshold: f64) -> OsrScore {
    OsrScore::new(DetectorId::Softmax, max_softmax_value(&record.logits), threshold)
}

/// `||p - e_top||_2 * ||h||_2`: the Frobenius norm of the cross-entropy
/// gradient with respect to the last-layer weights, using the model's own
/// prediction as label.
pub fn gradient_value(logits: &[f32], features: &[f32]) -> f64 {
    let TailSums { rest, rest_sq } = tail_sums(logits);
    let total = 1.0 + rest;
    // (1 - p_top)^2 + sum_{c != top} p_c^2, with 1 - p_top = rest / total
    let residual = (rest * rest + rest_sq).sqrt() / total;
    residual * norm_f32(features)
}

pub fn score_gradient(record: &InferenceRecord, head: &ModelHead, threshold: f64) -> Result<OsrScore> {
    if record.features.is_empty() {
        return Err(Error::InvalidInput(format!(
            "record {}: gradient score needs a non-empty feature vector",
            record.sample_id
        )));
    }
    record.validate(head.num_classes, head.feature_dim)?;
    Ok(OsrScore::new(
        DetectorId::Gradient,
        gradient_value(&record.logits, &record.features),
        threshold,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        assert!((max_softmax_value(&[0.3; 4]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits() {
        let v = max_softmax_value(&[100.0, 0.0]);
        assert!(v > 0.0 && v < 1e-20, "{v}");
    }

    #[test]
    fn one_two_three() {
        // 1 - e^3 / (e^1 + e^2 + e^3)
        let e = std::f64::consts::E;
        let expected = 1.0 - e.powi(3) / (e + e * e + e.powi(3));
        assert!((max_softmax_value(&[1.0, 2.0, 3.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_one_hot() {
        assert_eq!(gradient_value(&[1000.0, 0.0, 0.0], &[3.0, 4.0]), 0.0);
    }

    #[test]
    fn gradient_uniform_two_classes() {
        let v = gradient_value(&[0.0, 0.0], &[0.6, 0.8]);
        assert!((v - 0.5f64.sqrt()).abs() < 1e-7, "{v}");
    }

    #[test]
    fn gradient_rejects_empty_features() {
        let head = ModelHead::new(vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        let r = InferenceRecord::new(0, 0, vec![0.0, 1.0], vec![]);
        assert!(score_gradient(&r, &head, 0.0).is_err());
    }
}
