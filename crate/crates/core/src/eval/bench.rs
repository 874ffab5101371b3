use std::hint::black_box;
use std::time::{Duration, Instant};

use crate::bundle::DetectorBundle;
use crate::error::{Error, Result};
use crate::record::{DetectorId, InferenceRecord};

pub const MIN_BENCH_DURATION: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub detector: DetectorId,
    pub scores_per_second: f64,
    pub scored: u64,
    pub elapsed: Duration,
    pub num_classes: usize,
    pub feature_dim: usize,
}

/// Scores `records` over and over on the calling thread for at least
/// `min_duration` of wall time.
pub fn bench_throughput(
    detector: DetectorId,
    bundle: &DetectorBundle,
    records: &[InferenceRecord],
    min_duration: Duration,
) -> Result<Throughput> {
    if records.is_empty() {
        return Err(Error::InvalidInput("throughput needs at least one record".into()));
    }
    if min_duration < MIN_BENCH_DURATION {
        return Err(Error::InvalidInput(format!(
            "benchmark duration must be at least {MIN_BENCH_DURATION:?}"
        )));
    }
    // one untimed pass surfaces scoring errors and warms caches
    for r in records {
        black_box(bundle.score(detector, r)?);
    }
    let start = Instant::now();
    let mut scored = 0u64;
    loop {
        for r in records {
            // errors were ruled out by the warm-up pass
            black_box(bundle.score(detector, black_box(r)).ok());
            scored += 1;
            if scored.is_multiple_of(256) && start.elapsed() >= min_duration {
                break;
            }
        }
        if start.elapsed() >= min_duration {
            break;
        }
    }
    let elapsed = start.elapsed();
    Ok(Throughput {
        detector,
        scores_per_second: scored as f64 / elapsed.as_secs_f64(),
        scored,
        elapsed,
        num_classes: bundle.num_classes(),
        feature_dim: bundle.feature_dim(),
    })
}
