use std::io::Write;

use crate::error::{Error, Result};
use crate::tracking::drift::{DriftAlert, DriftMonitor};
use crate::tracking::moments::StreamingMoments;

/// One sampled point of a tracking time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRow {
    pub n: u64,
    /// The value that was just fed.
    pub value: f64,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
    pub skew: Option<f64>,
    /// Alerts fired since the previous row.
    pub alerts: Vec<DriftAlert>,
}

/// Feeds values into a tracker, samples its statistics every `stride`
/// values and runs drift policies after each value. Memory use is constant.
#[derive(Debug, Clone)]
pub struct TrackingSession {
    moments: StreamingMoments,
    monitor: Option<DriftMonitor>,
    stride: u64,
    pending: Vec<DriftAlert>,
    last_value: f64,
}

impl TrackingSession {
    pub fn new(stride: u64, monitor: Option<DriftMonitor>) -> Self {
        Self::resume(StreamingMoments::new(), stride, monitor)
    }

    pub fn resume(moments: StreamingMoments, stride: u64, monitor: Option<DriftMonitor>) -> Self {
        TrackingSession {
            moments,
            monitor,
            stride: stride.max(1),
            pending: Vec::new(),
            last_value: 0.0,
        }
    }

    pub fn moments(&self) -> &StreamingMoments {
        &self.moments
    }

    fn row(&mut self) -> TrackingRow {
        TrackingRow {
            n: self.moments.count(),
            value: self.last_value,
            mean: self.moments.mean(),
            std_dev: self.moments.std_dev(),
            skew: self.moments.skewness(),
            alerts: std::mem::take(&mut self.pending),
        }
    }

    /// Returns the new alerts and, every `stride` values, a sampled row.
    pub fn push(&mut self, value: f64) -> (Option<TrackingRow>, Vec<DriftAlert>) {
        self.moments.update(value);
        self.last_value = value;
        let alerts = match &mut self.monitor {
            Some(m) => m.observe(&self.moments),
            None => Vec::new(),
        };
        self.pending.extend(alerts.iter().cloned());
        let row = self.moments.count().is_multiple_of(self.stride).then(|| self.row());
        (row, alerts)
    }

    /// Row for the final state when the stream did not end on a stride boundary.
    pub fn finish(mut self) -> Option<TrackingRow> {
        let n = self.moments.count();
        (n > 0 && !n.is_multiple_of(self.stride)).then(|| self.row())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const TRACKING_CSV_HEADER: &str = "n,value,mean,std,skew,alerts";

pub fn write_tracking_row<W: Write>(sink: &mut W, row: &TrackingRow) -> Result<()> {
    let alerts: Vec<String> = row.alerts.iter().map(|a| a.statistic.to_string()).collect();
    writeln!(
        sink,
        "{},{},{},{},{},{}",
        row.n,
        row.value,
        opt(row.mean),
        opt(row.std_dev),
        opt(row.skew),
        alerts.join(";")
    )
    .map_err(Error::Io)
}
