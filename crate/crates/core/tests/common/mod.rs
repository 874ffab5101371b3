//! Reference implementations used as test oracles. None of these call into
//! the library's numeric code.
#![allow(dead_code, clippy::needless_range_loop)]

use osrmon::InferenceRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_record(rng: &mut ChaCha8Rng, id: u64, k: usize, d: usize, raw: Option<usize>) -> InferenceRecord {
    let logits = (0..k).map(|_| (3.0 * normal(rng)) as f32).collect();
    let features = (0..d).map(|_| normal(rng) as f32).collect();
    let label = rng.random_range(-2..k as i32);
    let r = InferenceRecord::new(id, label, logits, features);
    match raw {
        Some(n) => r.with_raw_input((0..n).map(|_| normal(rng) as f32).collect()),
        None => r,
    }
}

/// Softmax via naive log-sum-exp, written independently of the library.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
    z.iter().map(|v| (v - m).exp() / s).collect()
}

/// Cross-entropy of `softmax(W h)` against class `y`.
pub fn cross_entropy(w: &[Vec<f64>], h: &[f64], y: usize) -> f64 {
    let z: Vec<f64> = w
        .iter()
        .map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
        .collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[y]
}

/// Frobenius norm of the central finite-difference gradient of the
/// cross-entropy with respect to every entry of `W`.
pub fn finite_difference_gradient_norm(w: &[Vec<f64>], h: &[f64], y: usize, step: f64) -> f64 {
    let mut w = w.to_vec();
    let mut sum = 0.0;
    for i in 0..w.len() {
        for j in 0..h.len() {
            let orig = w[i][j];
            w[i][j] = orig + step;
            let up = cross_entropy(&w, h, y);
            w[i][j] = orig - step;
            let down = cross_entropy(&w, h, y);
            w[i][j] = orig;
            let g = (up - down) / (2.0 * step);
            sum += g * g;
        }
    }
    sum.sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues (descending) and the matching unit eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

pub fn covariance(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = data[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![vec![0.0; d]; d];
    for x in data {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    c
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Two-pass mean, Bessel variance and adjusted Fisher-Pearson skewness.
pub fn two_pass_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let m3: f64 = xs.iter().map(|x| (x - mean).powi(3)).sum();
    let var = m2 / (n - 1.0);
    let g1 = (n * (n - 1.0)).sqrt() / (n - 2.0) * (m3 / n) / (m2 / n).powf(1.5);
    (mean, var, g1)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Pairwise AUC: fraction of (unknown, known) pairs ordered correctly, ties 1/2.
pub fn pairwise_auc(known: &[f64], unknown: &[f64]) -> f64 {
    let mut wins = 0.0;
    for u in unknown {
        for k in known {
            wins += if u > k {
                1.0
            } else if u == k {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (known.len() * unknown.len()) as f64
}
