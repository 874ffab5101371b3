use crate::error::{Error, Result};

pub const DEFAULT_TARGET_FPR: f64 = 0.01;

/// Nearest-rank `(1 - target_fpr)` quantile of known-class scores.
///
/// Records are flagged when their score is strictly above the threshold, so
/// at most `target_fpr` of these scores are flagged (plus rounding of one
/// rank). With ties at the quantile the achieved rate can be lower; when many
/// scores share the threshold value it is the tie, not the target, that
/// decides.
pub fn calibrate_threshold(known_scores: &[f64], target_fpr: f64) -> Result<f64> {
    if known_scores.is_empty() {
        return Err(Error::InvalidInput("cannot calibrate a threshold on no scores".into()));
    }
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::Domain(format!("target FPR must be in (0, 1), got {target_fpr}")));
    }
    if known_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let n = known_scores.len();
    if (n as f64) < 1.0 / target_fpr {
        log::warn!("calibrating FPR {target_fpr} on only {n} scores");
    }
    let mut sorted = known_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    // 1-based nearest rank; the small slack absorbs representation error in 1 - fpr
    let rank = ((n as f64) * (1.0 - target_fpr) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}
