mod common;

use std::time::Duration;

use osrmon::detectors::{fit_bundle, FitConfig};
use osrmon::eval::{auc, bench_throughput, evaluate, partial_auc, DEFAULT_FPR_CAPS, MIN_BENCH_DURATION};
use osrmon::simulate::{generate_synthetic_records, SyntheticWorldConfig};
use osrmon::{DetectorId, InferenceRecord};
use proptest::prelude::*;
use rand::Rng;

use common::{normal, pairwise_auc, rng};

/// Scores rounded to a coarse grid so that ties are common.
fn tied_scores(r: &mut rand_chacha::ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    (0..n).map(|_| ((normal(r) + shift) * 4.0).round() / 4.0).collect()
}

/// ROC by brute-force counting at every distinct score, integrated on a
/// dense grid with linear interpolation between vertices.
fn dense_partial_auc(known: &[f64], unknown: &[f64], cap: f64) -> f64 {
    let mut cuts: Vec<f64> = known.iter().chain(unknown).copied().collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut roc = vec![(0.0, 0.0)];
    for t in cuts {
        let fpr = known.iter().filter(|&&s| s >= t).count() as f64 / known.len() as f64;
        let tpr = unknown.iter().filter(|&&s| s >= t).count() as f64 / unknown.len() as f64;
        roc.push((fpr, tpr));
    }
    let at = |x: f64| -> f64 {
        let i = roc.iter().rposition(|p| p.0 <= x).unwrap();
        if i + 1 == roc.len() || roc[i].0 == x {
            // highest vertex at this fpr
            return roc.iter().filter(|p| p.0 == roc[i].0).map(|p| p.1).fold(0.0, f64::max);
        }
        let (x0, y0) = roc[i];
        let (x1, y1) = roc[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    let steps = 200_000;
    let h = cap / steps as f64;
    (0..steps).map(|i| at((i as f64 + 0.5) * h)).sum::<f64>() * h / cap
}

#[test]
fn auc_matches_pairwise_count() {
    let mut r = rng(21);
    for _ in 0..20 {
        let known = tied_scores(&mut r, 200, 0.0);
        let unknown = tied_scores(&mut r, 200, 0.7);
        assert!((auc(&known, &unknown).unwrap() - pairwise_auc(&known, &unknown)).abs() < 1e-12);
    }
}

#[test]
fn partial_auc_matches_dense_integration() {
    let mut r = rng(22);
    for cap in [0.01, 0.05, 0.1, 0.5, 1.0] {
        let n = r.random_range(50..300);
        let known = tied_scores(&mut r, n, 0.0);
        let unknown = tied_scores(&mut r, 300 - n, 1.0);
        let value = partial_auc(&known, &unknown, cap).unwrap();
        let oracle = dense_partial_auc(&known, &unknown, cap);
        assert!((value - oracle).abs() < 1e-4, "cap {cap}: {value} vs {oracle}");
    }
}

#[test]
fn oracle_and_constant_detectors() {
    let known: Vec<f64> = (0..50).map(f64::from).collect();
    let unknown: Vec<f64> = (100..150).map(f64::from).collect();
    assert_eq!(auc(&known, &unknown).unwrap(), 1.0);
    for cap in DEFAULT_FPR_CAPS {
        assert_eq!(partial_auc(&known, &unknown, cap).unwrap(), 1.0);
    }
    let flat = vec![3.0; 40];
    assert_eq!(auc(&flat[..10], &flat[10..]).unwrap(), 0.5);
    assert!((partial_auc(&flat[..10], &flat[10..], 0.1).unwrap() - 0.05).abs() < 1e-15);
}

#[test]
fn undefined_inputs_are_rejected() {
    assert!(auc(&[], &[1.0]).is_err());
    assert!(auc(&[1.0], &[f64::NAN]).is_err());
    assert!(partial_auc(&[0.0], &[1.0], 0.0).is_err());
    assert!(partial_auc(&[0.0], &[1.0], 1.5).is_err());
}

fn score_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-20i32..20).prop_map(|v| f64::from(v) / 2.0), 1..60)
}

proptest! {
    #[test]
    fn swapping_populations_complements(known in score_vec(), unknown in score_vec()) {
        let sum = auc(&known, &unknown).unwrap() + auc(&unknown, &known).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_monotone_transform(known in score_vec(), unknown in score_vec()) {
        let f = |v: &f64| (0.3 * v).exp() * 7.0 - 2.0;
        let a = auc(&known, &unknown).unwrap();
        let b = auc(&known.iter().map(f).collect::<Vec<_>>(), &unknown.iter().map(f).collect::<Vec<_>>()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let pa = partial_auc(&known, &unknown, 0.1).unwrap();
        let pb = partial_auc(&known.iter().map(f).collect::<Vec<_>>(), &unknown.iter().map(f).collect::<Vec<_>>(), 0.1).unwrap();
        prop_assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn uncapped_partial_auc_is_auc(known in score_vec(), unknown in score_vec()) {
        let a = auc(&known, &unknown).unwrap();
        prop_assert!((partial_auc(&known, &unknown, 1.0).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn auc_stays_in_unit_interval(known in score_vec(), unknown in score_vec()) {
        let a = auc(&known, &unknown).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - pairwise_auc(&known, &unknown)).abs() < 1e-12);
    }
}

fn world_eval_records() -> (osrmon::DetectorBundle, Vec<InferenceRecord>) {
    let config = SyntheticWorldConfig {
        raw_dim: 16,
        ..Default::default()
    };
    let world = generate_synthetic_records(&config, None).unwrap();
    let bundle = fit_bundle(&world.fit, 10, 32, Some(&world.head), None, &FitConfig::default()).unwrap();
    (bundle, world.test)
}

#[test]
fn every_detector_beats_chance_on_the_synthetic_world() {
    let (bundle, test) = world_eval_records();
    let report = evaluate(&test, &bundle, &DetectorId::ALL, &DEFAULT_FPR_CAPS, None).unwrap();
    assert_eq!(report.detectors.len(), 6);
    for d in &report.detectors {
        assert!(d.auc > 0.5, "{} auc {}", d.detector, d.auc);
        assert_eq!(d.n_known, 1000);
        assert_eq!(d.n_unknown, 400);
        assert_eq!(d.partial_aucs.len(), 2);
    }
}

#[test]
fn evaluation_needs_both_populations() {
    let (bundle, test) = world_eval_records();
    let known_only: Vec<_> = test.into_iter().filter(|r| r.true_label >= 0).collect();
    assert!(evaluate(&known_only, &bundle, &[DetectorId::Softmax], &DEFAULT_FPR_CAPS, None).is_err());
}

#[test]
fn bench_on_one_record_reports_a_rate() {
    let (bundle, test) = world_eval_records();
    let t = bench_throughput(DetectorId::Softmax, &bundle, &test[..1], MIN_BENCH_DURATION).unwrap();
    assert!(t.scores_per_second > 0.0 && t.scored > 0);
    assert!(t.elapsed >= MIN_BENCH_DURATION);
    assert_eq!((t.num_classes, t.feature_dim), (10, 32));
    assert!(bench_throughput(DetectorId::Softmax, &bundle, &test[..1], Duration::from_millis(10)).is_err());
    assert!(bench_throughput(DetectorId::Softmax, &bundle, &[], MIN_BENCH_DURATION).is_err());
}
