//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::squared_distance;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step, then the final inertia.
    pub inertia_history: Vec<f64>,
}

fn check(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("number of clusters must be >= 1".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidInput(format!(
            "{k} clusters requested for {} samples",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidInput("points have unequal dimensions".into()));
    }
    Ok(())
}

/// k-means++ seeding: each new center is drawn with probability proportional
/// to the squared distance to the closest center chosen so far.
pub fn kmeans_plus_plus<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    check(points, k)?;
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut closest: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[first])).collect();
    while centers.len() < k {
        let total: f64 = closest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` just short of `target`
            pick.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every remaining point coincides with a center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        for (c, p) in closest.iter_mut().zip(points) {
            *c = c.min(squared_distance(p, &points[next]));
        }
        centers.push(points[next].clone());
    }
    Ok(centers)
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let mut best = (f64::INFINITY, 0);
        for (j, c) in centroids.iter().enumerate() {
            let d = squared_distance(p, c);
            if d < best.0 {
                best = (d, j);
            }
        }
        *label = best.1;
        inertia += best.0;
    }
    inertia
}

/// Lloyd iterations from the given centroids until no centroid moves by
/// `tolerance` or more, or `max_iterations` updates have run. An empty
/// cluster keeps its previous centroid.
pub fn lloyd(points: &[Vec<f64>], init: Vec<Vec<f64>>, tolerance: f64, max_iterations: usize) -> Result<KMeansFit> {
    check(points, init.len())?;
    let dim = points[0].len();
    if init.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidInput("initial centroids have the wrong dimension".into()));
    }
    let k = init.len();
    let mut centroids = init;
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iterations {
        history.push(assign(points, &centroids, &mut labels));
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for ((c, s), &count) in centroids.iter_mut().zip(sums).zip(&counts) {
            if count == 0 {
                continue;
            }
            let updated: Vec<f64> = s.into_iter().map(|v| v / count as f64).collect();
            shift = shift.max(squared_distance(c, &updated).sqrt());
            *c = updated;
        }
        iterations += 1;
        if shift < tolerance {
            break;
        }
    }
    let inertia = assign(points, &centroids, &mut labels);
    history.push(inertia);
    Ok(KMeansFit {
        centroids,
        inertia,
        iterations,
        inertia_history: history,
    })
}

/// Seeded k-means; with `restarts > 1` the lowest-inertia run is kept.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    check(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let init = kmeans_plus_plus(points, k, &mut rng)?;
        let fit = lloyd(points, init, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[[f64; 2]], per: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        centers
            .iter()
            .flat_map(|c| {
                (0..per)
                    .map(|_| vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)])
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Straightforward reference Lloyd loop.
    fn reference_lloyd(points: &[Vec<f64>], mut c: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        for _ in 0..DEFAULT_MAX_ITERATIONS {
            let mut groups: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); c.len()];
            for p in points {
                let j = (0..c.len())
                    .min_by(|&a, &b| {
                        let da: f64 = p.iter().zip(&c[a]).map(|(x, y)| (x - y).powi(2)).sum();
                        let db: f64 = p.iter().zip(&c[b]).map(|(x, y)| (x - y).powi(2)).sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                groups[j].push(p);
            }
            let mut moved: f64 = 0.0;
            for (cj, g) in c.iter_mut().zip(&groups) {
                if g.is_empty() {
                    continue;
                }
                let new: Vec<f64> = (0..cj.len())
                    .map(|d| g.iter().map(|p| p[d]).sum::<f64>() / g.len() as f64)
                    .collect();
                moved = moved.max(
                    new.iter()
                        .zip(cj.iter())
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt(),
                );
                *cj = new;
            }
            if moved < DEFAULT_TOLERANCE {
                break;
            }
        }
        c
    }

    #[test]
    fn separated_clouds() {
        let points = blobs(&[[-50.0, 0.0], [50.0, 10.0]], 200, 1.0, 1);
        let fit = kmeans(&points, 2, 3, 1).unwrap();
        let mean = |range: std::ops::Range<usize>| -> Vec<f64> {
            (0..2)
                .map(|d| points[range.clone()].iter().map(|p| p[d]).sum::<f64>() / range.len() as f64)
                .collect()
        };
        let (a, b) = (mean(0..200), mean(200..400));
        let mut cs = fit.centroids.clone();
        cs.sort_by(|x, y| x[0].partial_cmp(&y[0]).unwrap());
        assert!(squared_distance(&cs[0], &a).sqrt() < 1e-6);
        assert!(squared_distance(&cs[1], &b).sqrt() < 1e-6);
    }

    #[test]
    fn one_centroid_per_point() {
        let points = blobs(&[[0.0, 0.0]], 25, 3.0, 2);
        let fit = kmeans(&points, points.len(), 9, 1).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn duplicate_points_still_seed() {
        let points = vec![vec![1.0], vec![1.0], vec![1.0]];
        let fit = kmeans(&points, 3, 0, 1).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn too_many_clusters() {
        let points = vec![vec![1.0], vec![2.0]];
        assert!(kmeans(&points, 3, 0, 1).is_err());
    }

    #[test]
    fn matches_reference_lloyd_and_beats_worst_restart() {
        let points = blobs(
            &[[0.0, 0.0], [4.0, 1.0], [1.0, 5.0], [6.0, 6.0], [-3.0, 4.0]],
            60,
            1.2,
            5,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init = kmeans_plus_plus(&points, 5, &mut rng).unwrap();
        let fit = lloyd(&points, init.clone(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS).unwrap();
        let expected = reference_lloyd(&points, init);
        for (a, b) in fit.centroids.iter().zip(&expected) {
            assert!(squared_distance(a, b).sqrt() < 1e-12);
        }
        for w in fit.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", fit.inertia_history);
        }

        let worst = (0..10)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + s);
                let init: Vec<Vec<f64>> = (0..5)
                    .map(|_| points[rng.random_range(0..points.len())].clone())
                    .collect();
                lloyd(&points, init, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)
                    .unwrap()
                    .inertia
            })
            .fold(0.0, f64::max);
        assert!(fit.inertia <= worst);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let points = blobs(&[[0.0, 0.0], [3.0, 3.0]], 50, 1.0, 8);
        assert_eq!(kmeans(&points, 4, 21, 2).unwrap(), kmeans(&points, 4, 21, 2).unwrap());
    }
}
