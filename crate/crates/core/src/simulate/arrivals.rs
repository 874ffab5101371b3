use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tracking::{expected_moments, BernoulliExpectation};

/// Seeded generator used throughout: ChaCha8 from `rand_chacha`, keyed with
/// `SeedableRng::seed_from_u64`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalConfig {
    pub alpha: f64,
    pub n: u64,
    pub seed: u64,
}

impl ArrivalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!(
                "zero-day rate must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n < 1 {
            return Err(Error::Domain("stream length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Lazy Bernoulli stream; sample `i` is 1 when the `i`-th uniform draw in
/// `[0, 1)` is below the rate in force at `i`.
#[derive(Debug, Clone)]
pub struct Arrivals {
    rng: ChaCha8Rng,
    alpha: f64,
    index: u64,
    n: u64,
    shift: Option<(u64, f64)>,
}

impl Iterator for Arrivals {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        if self.index == self.n {
            return None;
        }
        let alpha = match self.shift {
            Some((at, after)) if self.index >= at => after,
            _ => self.alpha,
        };
        self.index += 1;
        Some(u8::from(self.rng.random::<f64>() < alpha))
    }
}

/// i.i.d. Bernoulli(alpha) arrivals.
pub fn arrivals(config: ArrivalConfig) -> Result<Arrivals> {
    config.validate()?;
    Ok(Arrivals {
        rng: seeded_rng(config.seed),
        alpha: config.alpha,
        index: 0,
        n: config.n,
        shift: None,
    })
}

/// Arrivals whose rate changes to `alpha_after` from the 0-based sample
/// index `at` on. Before `at` the stream equals `arrivals(config)`.
pub fn shifted_arrivals(config: ArrivalConfig, at: u64, alpha_after: f64) -> Result<Arrivals> {
    ArrivalConfig {
        alpha: alpha_after,
        ..config
    }
    .validate()?;
    let mut stream = arrivals(config)?;
    stream.shift = Some((at, alpha_after));
    Ok(stream)
}

pub fn generate_arrivals(config: ArrivalConfig) -> Result<Vec<u8>> {
    Ok(arrivals(config)?.collect())
}

/// Expected Bernoulli moments over a grid of zero-day rates.
pub fn expected_moment_curve(alphas: &[f64]) -> Result<Vec<BernoulliExpectation>> {
    alphas.iter().map(|&a| expected_moments(a)).collect()
}

pub fn write_moment_curve<W: Write>(mut sink: W, curve: &[BernoulliExpectation]) -> Result<()> {
    writeln!(sink, "alpha,mean,std,skew")?;
    for e in curve {
        writeln!(sink, "{},{},{},{}", e.alpha, e.mean, e.std_dev, e.skew)?;
    }
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::StreamingMoments;

    #[test]
    fn determinism() {
        let c = ArrivalConfig {
            alpha: 0.2,
            n: 1000,
            seed: 5,
        };
        assert_eq!(generate_arrivals(c).unwrap(), generate_arrivals(c).unwrap());
        let other = ArrivalConfig { seed: 6, ..c };
        assert_ne!(generate_arrivals(c).unwrap(), generate_arrivals(other).unwrap());
    }

    #[test]
    fn shift_keeps_the_prefix() {
        let c = ArrivalConfig {
            alpha: 0.01,
            n: 20_000,
            seed: 9,
        };
        let plain = generate_arrivals(c).unwrap();
        let shifted: Vec<u8> = shifted_arrivals(c, 10_000, 0.5).unwrap().collect();
        assert_eq!(plain[..10_000], shifted[..10_000]);
        let tail = shifted[10_000..].iter().map(|&x| u32::from(x)).sum::<u32>();
        assert!((4_500..5_500).contains(&tail));
        assert!(shifted_arrivals(c, 10, 1.0).is_err());
    }

    #[test]
    fn domain() {
        assert!(generate_arrivals(ArrivalConfig {
            alpha: 0.0,
            n: 10,
            seed: 0
        })
        .is_err());
        assert!(generate_arrivals(ArrivalConfig {
            alpha: 0.5,
            n: 0,
            seed: 0
        })
        .is_err());
    }

    #[test]
    fn empirical_mean_within_three_standard_errors() {
        let (alpha, n) = (0.01, 1_000_000u64);
        let m = StreamingMoments::from_values(arrivals(ArrivalConfig { alpha, n, seed: 1 }).unwrap().map(f64::from));
        let se = (alpha * (1.0 - alpha) / n as f64).sqrt();
        assert!((m.mean().unwrap() - alpha).abs() < 3.0 * se);
    }

    #[test]
    fn fair_coin_has_no_skew() {
        let m = StreamingMoments::from_values(
            arrivals(ArrivalConfig {
                alpha: 0.5,
                n: 1_000_000,
                seed: 2,
            })
            .unwrap()
            .map(f64::from),
        );
        assert!(m.skewness().unwrap().abs() < 0.02);
    }

    #[test]
    fn curve() {
        let c = expected_moment_curve(&[0.5]).unwrap();
        assert_eq!(c[0].skew, 0.0);
        let c = expected_moment_curve(&[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert!(c.windows(2).all(|w| w[1].skew > w[0].skew));
        assert_eq!(c[3].mean, 1e-4);
        assert!((c[3].skew - 99.99).abs() < 0.01);
        let mut out = Vec::new();
        write_moment_curve(&mut out, &c[..1]).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("alpha,mean,std,skew\n0.1,0.1,"));
    }
}
