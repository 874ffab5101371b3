use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_RETAINED_VARIANCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    pub mean: Vec<f64>,
    /// Retained principal directions, each of length D, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// All covariance eigenvalues, descending, clamped at 0.
    pub eigenvalues: Vec<f64>,
}

impl PcaFit {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        project(&self.mean, &self.components, x)
    }
}

pub fn project(mean: &[f64], components: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    components
        .iter()
        .map(|c| c.iter().zip(x).zip(mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
        .collect()
}

/// PCA on the sample covariance (denominator `N - 1`), keeping the fewest
/// components whose cumulative explained variance reaches `retained_variance`.
///
/// Each component is signed so its largest-magnitude entry is positive.
pub fn fit_pca(data: &[Vec<f64>], retained_variance: f64) -> Result<PcaFit> {
    if !(retained_variance > 0.0 && retained_variance <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "retained variance must be in (0, 1], got {retained_variance}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidInput("PCA needs at least two samples".into()));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidInput("PCA samples have inconsistent dimensions".into()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let eig = cov.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    let keep = if total > 0.0 {
        let mut acc = 0.0;
        let mut keep = d;
        for (i, ev) in eigenvalues.iter().enumerate() {
            acc += ev;
            if acc / total >= retained_variance - 1e-12 {
                keep = i + 1;
                break;
            }
        }
        keep
    } else {
        1
    };

    let components = order[..keep]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaFit {
        mean,
        components,
        eigenvalues,
    })
}

/// Largest deviation of `components * components^T` from the identity.
pub fn orthonormality_error(components: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in components.iter().enumerate() {
        for (j, b) in components.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional() {
        let data: Vec<Vec<f64>> = [1.0, 2.0, 4.0, 8.0].iter().map(|&v| vec![v]).collect();
        let fit = fit_pca(&data, 0.95).unwrap();
        assert_eq!(fit.dim(), 1);
        assert!((fit.components[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn plane_in_five_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = [1.0, 2.0, 0.0, -1.0, 0.5];
        let v = [0.0, 1.0, 1.0, 1.0, -2.0];
        let data: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (0..5).map(|j| a * u[j] + b * v[j] + 3.0).collect()
            })
            .collect();
        let fit = fit_pca(&data, 0.95).unwrap();
        assert_eq!(fit.dim(), 2);
        assert!(orthonormality_error(&fit.components) < 1e-8);
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_pca(&[vec![1.0]], 0.9).is_err());
        assert!(fit_pca(&[vec![1.0], vec![2.0]], 0.0).is_err());
    }
}
