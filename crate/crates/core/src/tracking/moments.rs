use serde::{Deserialize, Serialize};

/// Single-pass count, mean and second/third central moment sums.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamingMoments {
    pub n: u64,
    pub mean: f64,
    /// `sum (x - mean)^2`
    pub m2: f64,
    /// `sum (x - mean)^3`
    pub m3: f64,
}

impl StreamingMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut m = Self::new();
        for x in values {
            m.update(x);
        }
        m
    }

    pub fn update(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    /// Pairwise combination; equal to tracking `self` then `other` in one stream.
    pub fn merge(&self, other: &StreamingMoments) -> StreamingMoments {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n;
        let m3 = self.m3
            + other.m3
            + delta.powi(3) * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        StreamingMoments {
            n: self.n + other.n,
            mean,
            m2: m2.max(0.0),
            m3,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    /// Bessel-corrected variance; undefined below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }

    fn has_spread(&self) -> bool {
        // rounding can leave a residue of order eps^2 * n * mean^2 on constant streams
        self.m2 > (self.n as f64) * (f64::EPSILON * self.mean).powi(2)
    }

    /// Adjusted Fisher-Pearson skewness `G1`; undefined below three samples
    /// or when the stream has no spread.
    pub fn skewness(&self) -> Option<f64> {
        if self.n < 3 || !self.has_spread() {
            return None;
        }
        let n = self.n as f64;
        let g1 = (self.m3 / n) / (self.m2 / n).powf(1.5);
        Some((n * (n - 1.0)).sqrt() / (n - 2.0) * g1)
    }
}
