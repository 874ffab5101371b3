//! Per-inference evaluation: AUC, FPR-capped AUC and scoring throughput.

pub mod bench;
pub mod metrics;

use std::io::Write;
use std::time::Duration;

pub use self::bench::{bench_throughput, Throughput, MIN_BENCH_DURATION};
pub use self::metrics::{auc, partial_auc, roc_curve};

use crate::bundle::DetectorBundle;
use crate::error::{Error, Result};
use crate::record::{DetectorId, InferenceRecord, LABEL_UNKNOWN};

pub const DEFAULT_FPR_CAPS: [f64; 2] = [0.01, 0.10];

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorEval {
    pub detector: String,
    pub auc: f64,
    /// `(fpr_cap, normalized partial AUC)`.
    pub partial_aucs: Vec<(f64, f64)>,
    pub n_known: usize,
    pub n_unknown: usize,
    pub scores_per_second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub fpr_caps: Vec<f64>,
    pub detectors: Vec<DetectorEval>,
}

/// AUC and capped AUCs for one detector's already computed scores.
pub fn evaluate_scores(name: &str, known: &[f64], unknown: &[f64], fpr_caps: &[f64]) -> Result<DetectorEval> {
    Ok(DetectorEval {
        detector: name.to_string(),
        auc: auc(known, unknown)?,
        partial_aucs: fpr_caps
            .iter()
            .map(|&cap| partial_auc(known, unknown, cap).map(|p| (cap, p)))
            .collect::<Result<_>>()?,
        n_known: known.len(),
        n_unknown: unknown.len(),
        scores_per_second: None,
    })
}

/// Scores labeled records with each detector and reports separation metrics.
/// Records labeled known (`>= 0`) and unknown (`-1`) form the two
/// populations; unlabeled records are ignored. With `bench` set, each
/// detector is also timed on the evaluated records.
pub fn evaluate(
    records: &[InferenceRecord],
    bundle: &DetectorBundle,
    detectors: &[DetectorId],
    fpr_caps: &[f64],
    bench: Option<Duration>,
) -> Result<EvalReport> {
    let n_known = records.iter().filter(|r| r.true_label >= 0).count();
    let n_unknown = records.iter().filter(|r| r.true_label == LABEL_UNKNOWN).count();
    if n_known == 0 || n_unknown == 0 {
        return Err(Error::UndefinedMetric(format!(
            "evaluation needs known and unknown records (got {n_known} and {n_unknown})"
        )));
    }
    let mut out = Vec::new();
    for &det in detectors {
        let (mut known, mut unknown) = (Vec::with_capacity(n_known), Vec::with_capacity(n_unknown));
        for r in records {
            if r.true_label >= 0 {
                known.push(bundle.score_value(det, r)?);
            } else if r.true_label == LABEL_UNKNOWN {
                unknown.push(bundle.score_value(det, r)?);
            }
        }
        let mut eval = evaluate_scores(det.as_str(), &known, &unknown, fpr_caps)?;
        if let Some(duration) = bench {
            eval.scores_per_second = Some(bench_throughput(det, bundle, records, duration)?.scores_per_second);
        }
        out.push(eval);
    }
    Ok(EvalReport {
        fpr_caps: fpr_caps.to_vec(),
        detectors: out,
    })
}

/// Column name for a capped AUC: 0.01 -> `pauc_01`, 0.10 -> `pauc_10`.
pub fn pauc_column(cap: f64) -> String {
    format!("pauc_{:02}", (cap * 100.0).round() as u64)
}

impl EvalReport {
    /// Plot data: `detector,auc,pauc_01,pauc_10,throughput` (one `pauc_*`
    /// column per cap; throughput empty when not measured).
    pub fn write_plot_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["detector".to_string(), "auc".to_string()];
        header.extend(self.fpr_caps.iter().map(|&c| pauc_column(c)));
        header.push("throughput".into());
        w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
        for d in &self.detectors {
            let mut row = vec![d.detector.clone(), d.auc.to_string()];
            row.extend(d.partial_aucs.iter().map(|(_, p)| p.to_string()));
            row.push(d.scores_per_second.map(|t| format!("{t:.1}")).unwrap_or_default());
            w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}
