//! Gaussian-mixture stand-in for a deployed classifier's activation stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::record::{InferenceRecord, ModelHead, LABEL_UNKNOWN};
use crate::simulate::arrivals::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorldConfig {
    pub num_known: usize,
    pub num_unknown: usize,
    pub feature_dim: usize,
    /// Length of the raw input segment; 0 leaves it out.
    pub raw_dim: usize,
    /// Distance of known class centers from the origin.
    pub radius: f64,
    /// Distance of unknown class centers from the origin.
    pub unknown_radius: f64,
    /// Per-coordinate standard deviation around each center.
    pub noise: f64,
    /// Head weight rows are the known centers times this factor.
    pub logit_scale: f64,
    pub fit_per_class: usize,
    pub test_per_class: usize,
    pub unknown_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        SyntheticWorldConfig {
            num_known: 10,
            num_unknown: 4,
            feature_dim: 32,
            raw_dim: 0,
            radius: 4.0,
            unknown_radius: 4.0,
            noise: 1.0,
            logit_scale: 0.5,
            fit_per_class: 200,
            test_per_class: 100,
            unknown_per_class: 100,
            seed: 0,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_known < 2 {
            return Err(Error::Domain(format!(
                "need K >= 2 known classes, got {}",
                self.num_known
            )));
        }
        if self.num_unknown < 1 {
            return Err(Error::Domain("need U >= 1 unknown classes".into()));
        }
        if self.feature_dim < 1 {
            return Err(Error::Domain("feature dimension must be >= 1".into()));
        }
        for (name, v) in [
            ("radius", self.radius),
            ("unknown radius", self.unknown_radius),
            ("logit scale", self.logit_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Domain(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub head: ModelHead,
    pub known_centers: Vec<Vec<f64>>,
    pub unknown_centers: Vec<Vec<f64>>,
    /// Labeled known-class records for fitting.
    pub fit: Vec<InferenceRecord>,
    /// Known-class records followed by unknown-class records labeled -1.
    pub test: Vec<InferenceRecord>,
}

fn unit_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn centers(rng: &mut ChaCha8Rng, count: usize, d: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| unit_direction(rng, d).into_iter().map(|x| x * radius).collect())
        .collect()
}

struct Sampler<'a> {
    head: &'a ModelHead,
    mixing: Option<Vec<Vec<f64>>>,
    noise: f64,
    next_id: u64,
}

impl Sampler<'_> {
    fn sample(&mut self, rng: &mut ChaCha8Rng, center: &[f64], label: i32) -> InferenceRecord {
        let features: Vec<f32> = center
            .iter()
            .map(|&c| (c + self.noise * rng.sample::<f64, _>(StandardNormal)) as f32)
            .collect();
        let logits = self.head.logits(&features).into_iter().map(|v| v as f32).collect();
        let mut record = InferenceRecord::new(self.next_id, label, logits, features);
        self.next_id += 1;
        if let Some(mixing) = &self.mixing {
            let raw = mixing
                .iter()
                .map(|row| {
                    let v: f64 = row.iter().zip(&record.features).map(|(a, &h)| a * f64::from(h)).sum();
                    (v + 0.1 * self.noise * rng.sample::<f64, _>(StandardNormal)) as f32
                })
                .collect();
            record = record.with_raw_input(raw);
        }
        record
    }
}

/// Samples class-conditional Gaussian features and derives records from them.
/// Without a `head`, one is derived with weight rows pointing at the known
/// centers and zero bias. Raw inputs, when requested, are a fixed random
/// linear image of the features plus small noise.
pub fn generate_synthetic_records(config: &SyntheticWorldConfig, head: Option<&ModelHead>) -> Result<SyntheticWorld> {
    config.validate()?;
    let (k, d) = (config.num_known, config.feature_dim);
    let mut rng = seeded_rng(config.seed);
    let known_centers = centers(&mut rng, k, d, config.radius);
    let unknown_centers = centers(&mut rng, config.num_unknown, d, config.unknown_radius);
    let all = known_centers.iter().chain(&unknown_centers).collect::<Vec<_>>();
    for (i, a) in all.iter().enumerate() {
        if all[..i].iter().any(|b| a == b) {
            return Err(Error::Domain("class centers are not distinct".into()));
        }
    }
    let head = match head {
        Some(h) => {
            h.validate()?;
            if h.num_classes != k || h.feature_dim != d {
                return Err(Error::Domain(format!(
                    "model head is {}x{}, world needs {k}x{d}",
                    h.num_classes, h.feature_dim
                )));
            }
            h.clone()
        }
        None => ModelHead::new(
            known_centers
                .iter()
                .map(|c| c.iter().map(|x| x * config.logit_scale).collect())
                .collect(),
            vec![0.0; k],
        )?,
    };
    let mixing = (config.raw_dim > 0).then(|| {
        let scale = 1.0 / (d as f64).sqrt();
        (0..config.raw_dim)
            .map(|_| (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    });
    let mut sampler = Sampler {
        head: &head,
        mixing,
        noise: config.noise,
        next_id: 0,
    };
    let mut fit = Vec::with_capacity(k * config.fit_per_class);
    for (class, center) in known_centers.iter().enumerate() {
        for _ in 0..config.fit_per_class {
            fit.push(sampler.sample(&mut rng, center, class as i32));
        }
    }
    let mut test = Vec::with_capacity(k * config.test_per_class + config.num_unknown * config.unknown_per_class);
    for (class, center) in known_centers.iter().enumerate() {
        for _ in 0..config.test_per_class {
            test.push(sampler.sample(&mut rng, center, class as i32));
        }
    }
    for center in &unknown_centers {
        for _ in 0..config.unknown_per_class {
            test.push(sampler.sample(&mut rng, center, LABEL_UNKNOWN));
        }
    }
    Ok(SyntheticWorld {
        head,
        known_centers,
        unknown_centers,
        fit,
        test,
    })
}
