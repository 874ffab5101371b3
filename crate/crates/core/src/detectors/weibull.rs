//! Weibull models of the upper tail of a distance distribution.
//!
//! The shape is found by maximizing the profile log-likelihood in `k`
//! (the scale has a closed form given the shape). The profile score
//!
//! ```text
//! g(k) = sum x^k ln x / sum x^k - 1/k - mean(ln x)
//! ```
//!
//! is strictly increasing in `k` and invariant to rescaling `x`, so the root is
//! bracketed and found by Newton steps that fall back to bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the smallest tail value used as the tail origin.
pub const SHIFT_FACTOR: f64 = 0.999;
pub const MAX_ITERATIONS: usize = 200;
/// Convergence bound on the per-sample profile score `|g(k)|`.
pub const SCORE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullModel {
    pub shape: f64,
    pub scale: f64,
    pub shift: f64,
}

impl WeibullModel {
    pub fn new(shape: f64, scale: f64, shift: f64) -> Result<Self> {
        let m = WeibullModel { shape, scale, shift };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape.is_finite() && self.shape > 0.0) {
            return Err(Error::Invariant(format!(
                "Weibull shape must be > 0, got {}",
                self.shape
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Invariant(format!(
                "Weibull scale must be > 0, got {}",
                self.scale
            )));
        }
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return Err(Error::Invariant(format!(
                "Weibull shift must be >= 0, got {}",
                self.shift
            )));
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.shift {
            return 0.0;
        }
        let z = (x - self.shift) / self.scale;
        -(-z.powf(self.shape)).exp_m1()
    }

    /// Log-likelihood of already shifted values.
    pub fn log_likelihood(shape: f64, scale: f64, shifted: &[f64]) -> f64 {
        let n = shifted.len() as f64;
        let sum_ln: f64 = shifted.iter().map(|x| x.ln()).sum();
        let sum_pow: f64 = shifted.iter().map(|x| (x / scale).powf(shape)).sum();
        n * shape.ln() - n * shape * scale.ln() + (shape - 1.0) * sum_ln - sum_pow
    }
}

struct ProfileScore<'a> {
    /// Values divided by their maximum, so every power stays in (0, 1].
    ys: &'a [f64],
    ln_ys: Vec<f64>,
    mean_ln: f64,
}

impl<'a> ProfileScore<'a> {
    fn new(ys: &'a [f64]) -> Self {
        let ln_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let mean_ln = ln_ys.iter().sum::<f64>() / ys.len() as f64;
        ProfileScore { ys, ln_ys, mean_ln }
    }

    /// `(g(k), g'(k))`.
    fn eval(&self, k: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (y, l) in self.ys.iter().zip(&self.ln_ys) {
            let p = y.powf(k);
            s0 += p;
            s1 += p * l;
            s2 += p * l * l;
        }
        let ratio = s1 / s0;
        let g = ratio - 1.0 / k - self.mean_ln;
        let dg = s2 / s0 - ratio * ratio + 1.0 / (k * k);
        (g, dg)
    }
}

/// Per-sample derivative of the profile log-likelihood in the shape, at `shape`.
pub fn profile_score(shape: f64, shifted: &[f64]) -> f64 {
    let max = shifted.iter().copied().fold(0.0, f64::max);
    let ys: Vec<f64> = shifted.iter().map(|x| x / max).collect();
    -ProfileScore::new(&ys).eval(shape).0
}

/// Maximum-likelihood fit of a two-parameter Weibull to positive values.
pub fn fit_weibull_mle(shifted: &[f64]) -> Result<(f64, f64)> {
    if shifted.len() < 2 {
        return Err(Error::DegenerateTail("need at least two values".into()));
    }
    if let Some(bad) = shifted.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::DegenerateTail(format!("non-positive shifted value {bad}")));
    }
    let max = shifted.iter().copied().fold(0.0, f64::max);
    let min = shifted.iter().copied().fold(f64::INFINITY, f64::min);
    if min == max {
        return Err(Error::DegenerateTail("all tail values are equal".into()));
    }
    let ys: Vec<f64> = shifted.iter().map(|x| x / max).collect();
    let score = ProfileScore::new(&ys);

    // g -> -inf as k -> 0 and g -> -mean(ln y) > 0 as k -> inf
    let (mut lo, mut hi) = (1e-3, 1.0);
    while score.eval(lo).0 > 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::Numerical(
                "could not bracket the Weibull shape from below".into(),
            ));
        }
    }
    while score.eval(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Numerical(
                "could not bracket the Weibull shape from above".into(),
            ));
        }
    }

    let mut k = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let (g, dg) = score.eval(k);
        residual = g.abs();
        if residual < SCORE_TOLERANCE {
            let scale = max * (ys.iter().map(|y| y.powf(k)).sum::<f64>() / ys.len() as f64).powf(1.0 / k);
            return Ok((k, scale));
        }
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        k = if newton > lo && newton < hi && dg > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Fits a Weibull model to the `tail_size` largest distances.
///
/// The tail origin is `SHIFT_FACTOR * min(tail)` so every shifted value is positive.
pub fn fit_weibull_tail(distances: &[f64], tail_size: usize) -> Result<WeibullModel> {
    if tail_size < 3 {
        return Err(Error::InvalidInput(format!("tail size must be >= 3, got {tail_size}")));
    }
    if distances.len() < tail_size {
        return Err(Error::InvalidInput(format!(
            "need at least {tail_size} distances, got {}",
            distances.len()
        )));
    }
    if distances.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidInput("distances must be finite and non-negative".into()));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let tail = &sorted[..tail_size];
    let tail_min = tail[tail_size - 1];
    if tail[0] == tail_min {
        return Err(Error::DegenerateTail("all tail values are equal".into()));
    }
    let shift = SHIFT_FACTOR * tail_min;
    let shifted: Vec<f64> = tail.iter().map(|d| d - shift).collect();
    let (shape, scale) = fit_weibull_mle(&shifted)?;
    WeibullModel::new(shape, scale, shift)
}
