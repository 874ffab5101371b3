use std::io::Write;

use crate::error::Result;
use crate::simulate::arrivals::{arrivals, ArrivalConfig};
use crate::tracking::{
    write_tracking_row, DriftMonitor, DriftPolicy, TrackingRow, TrackingSession, TRACKING_CSV_HEADER,
};

/// Feeds a value stream through a tracking session and collects the sampled rows.
pub fn track_values(
    values: impl IntoIterator<Item = f64>,
    monitor: Option<DriftMonitor>,
    stride: u64,
) -> Vec<TrackingRow> {
    let mut session = TrackingSession::new(stride, monitor);
    let mut rows: Vec<TrackingRow> = values.into_iter().filter_map(|v| session.push(v).0).collect();
    rows.extend(session.finish());
    rows
}

/// Mean and skew policies with default bands and the given warm-up.
pub fn default_monitor(baseline_alpha: f64, warm_up: u64) -> DriftMonitor {
    let policies = [DriftPolicy::mean(), DriftPolicy::skew()]
        .map(|p| DriftPolicy { n_min: warm_up, ..p })
        .to_vec();
    DriftMonitor::new(baseline_alpha, policies)
}

/// Tracks a seeded arrival stream with the mean and skew policies, using the
/// stream's own rate as baseline and `warm_up` as the policies' `n_min`.
pub fn run_tracking_experiment(config: ArrivalConfig, warm_up: u64, stride: u64) -> Result<Vec<TrackingRow>> {
    let monitor = default_monitor(config.alpha, warm_up);
    Ok(track_values(arrivals(config)?.map(f64::from), Some(monitor), stride))
}

pub fn write_tracking_csv<W: Write>(mut sink: W, rows: &[TrackingRow]) -> Result<()> {
    writeln!(sink, "{TRACKING_CSV_HEADER}")?;
    for row in rows {
        write_tracking_row(&mut sink, row)?;
    }
    sink.flush()?;
    Ok(())
}
