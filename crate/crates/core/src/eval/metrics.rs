//! ROC metrics with unknown samples as the positive class. Ties count one
//! half everywhere, which makes the rank-sum AUC equal to the area under the
//! piecewise-linear ROC curve.

use crate::error::{Error, Result};

fn check(known: &[f64], unknown: &[f64]) -> Result<()> {
    if known.is_empty() || unknown.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both populations (known {}, unknown {})",
            known.len(),
            unknown.len()
        )));
    }
    if known.iter().chain(unknown).any(|s| !s.is_finite()) {
        return Err(Error::UndefinedMetric("scores must be finite".into()));
    }
    Ok(())
}

/// Probability that a random unknown scores above a random known, computed
/// from the Mann-Whitney rank sum with mid-ranks for ties.
pub fn auc(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check(known, unknown)?;
    let mut all: Vec<(f64, bool)> = known
        .iter()
        .map(|&s| (s, false))
        .chain(unknown.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their average
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let unknowns = all[i..j].iter().filter(|x| x.1).count();
        rank_sum += mid_rank * unknowns as f64;
        i = j;
    }
    let (nk, nu) = (known.len() as f64, unknown.len() as f64);
    Ok((rank_sum - nu * (nu + 1.0) / 2.0) / (nk * nu))
}

/// ROC vertices `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score.
pub fn roc_curve(known: &[f64], unknown: &[f64]) -> Result<Vec<(f64, f64)>> {
    check(known, unknown)?;
    let mut all: Vec<(f64, bool)> = known
        .iter()
        .map(|&s| (s, false))
        .chain(unknown.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (nk, nu) = (known.len() as f64, unknown.len() as f64);
    let mut curve = vec![(0.0, 0.0)];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        curve.push((fp as f64 / nk, tp as f64 / nu));
        i = j;
    }
    Ok(curve)
}

/// Area under the ROC curve for false-positive rates in `[0, fpr_cap]`,
/// interpolated linearly at the cap and divided by the cap, so 1 is perfect
/// and a chance-level diagonal ROC gives `fpr_cap / 2`. `fpr_cap = 1` gives
/// the AUC.
pub fn partial_auc(known: &[f64], unknown: &[f64], fpr_cap: f64) -> Result<f64> {
    if !(fpr_cap > 0.0 && fpr_cap <= 1.0) {
        return Err(Error::Domain(format!("FPR cap must be in (0, 1], got {fpr_cap}")));
    }
    let curve = roc_curve(known, unknown)?;
    let mut area = 0.0;
    for w in curve.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= fpr_cap {
            break;
        }
        if x1 <= fpr_cap {
            area += (x1 - x0) * (y0 + y1) / 2.0;
        } else {
            let y_cap = y0 + (y1 - y0) * (fpr_cap - x0) / (x1 - x0);
            area += (fpr_cap - x0) * (y0 + y_cap) / 2.0;
            break;
        }
    }
    Ok(area / fpr_cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        assert_eq!(auc(&[0.1, 0.2], &[0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(partial_auc(&[0.1, 0.2], &[0.8, 0.9], 0.01).unwrap(), 1.0);
        assert_eq!(auc(&[0.8, 0.9], &[0.1, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn single_tie() {
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert_eq!(partial_auc(&[0.5], &[0.5], 1.0).unwrap(), 0.5);
        assert!((partial_auc(&[0.5], &[0.5], 0.1).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn identical_distributions_follow_the_diagonal() {
        let scores: Vec<f64> = (0..100).map(f64::from).collect();
        for cap in [0.01, 0.1, 0.5, 1.0] {
            let p = partial_auc(&scores, &scores, cap).unwrap();
            assert!((p - cap / 2.0).abs() < 1e-12, "cap {cap}: {p}");
        }
    }

    #[test]
    fn empty_population() {
        assert!(matches!(auc(&[], &[1.0]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(partial_auc(&[1.0], &[], 0.1), Err(Error::UndefinedMetric(_))));
        assert!(partial_auc(&[1.0], &[2.0], 0.0).is_err());
    }

    #[test]
    fn cap_interpolation() {
        // knowns 0, 2; unknowns 1, 3: ROC (0,0) (0,.5) (.5,.5) (.5,1) (1,1)
        let (k, u) = ([0.0, 2.0], [1.0, 3.0]);
        assert_eq!(auc(&k, &u).unwrap(), 0.75);
        assert_eq!(partial_auc(&k, &u, 0.25).unwrap(), 0.5);
        assert_eq!(partial_auc(&k, &u, 0.5).unwrap(), 0.5);
        assert_eq!(partial_auc(&k, &u, 0.75).unwrap(), (0.25 + 0.25) / 0.75);
    }
}
