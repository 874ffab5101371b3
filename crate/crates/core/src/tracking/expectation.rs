use crate::error::{Error, Result};

/// Exact moments of a Bernoulli(alpha) indicator stream: the expected
/// behavior of binarized novelty decisions when a fraction `alpha` of the
/// inputs is unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliExpectation {
    pub alpha: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub skew: f64,
}

pub fn expected_moments(alpha: f64) -> Result<BernoulliExpectation> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("zero-day rate must be in (0, 1), got {alpha}")));
    }
    Ok(BernoulliExpectation {
        alpha,
        mean: alpha,
        std_dev: (alpha * (1.0 - alpha)).sqrt(),
        skew: ((1.0 - alpha) / alpha).sqrt() - (alpha / (1.0 - alpha)).sqrt(),
    })
}

/// The same skew written as `(1 - 2 alpha) / sqrt(alpha (1 - alpha))`.
pub fn bernoulli_skew_ratio_form(alpha: f64) -> f64 {
    (1.0 - 2.0 * alpha) / (alpha * (1.0 - alpha)).sqrt()
}
