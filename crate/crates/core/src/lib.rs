//! Open-set novelty scoring and model-quality tracking for deployed classifiers.
//!
//! Each inference of a classifier is turned into a novelty score by one of
//! several last-layer detectors; the stream of per-inference verdicts is
//! summarized by running moments and checked against the moments expected
//! at a baseline zero-day rate.

pub mod bundle;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod io;
pub mod math;
pub mod record;
pub mod simulate;
pub mod tracking;

pub use crate::bundle::{load_bundle, load_model_head, save_bundle, DetectorBundle};
pub use crate::error::{Error, Result};
pub use crate::record::{DetectorId, InferenceRecord, ModelHead, OsrScore, LABEL_UNKNOWN, LABEL_UNLABELED};
