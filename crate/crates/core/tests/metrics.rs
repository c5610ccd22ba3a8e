mod common;

use common::*;
use proptest::prelude::*;
use qsynth::matrix::Matrix;
use qsynth::metrics::{
    auc_roc, detectability_audit, fidelity_report, fit_logreg, ks_pvalue, ks_two_sample, percentile, roc_curve,
    stratified_split, wasserstein_1d,
};
use rand::Rng;

#[test]
fn ks_matches_brute_force() {
    ks_oracle_suite(200, 31).unwrap();
}

#[test]
fn wasserstein_properties() {
    wasserstein_property_suite(200, 32).unwrap();
}

#[test]
fn auc_matches_pair_counting() {
    auc_oracle_suite(100, 33).unwrap();
}

#[test]
fn ks_examples() {
    let (k, p) = ks_two_sample(&[0.0f64, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
    assert_eq!((k, p), (0.0, 1.0));
    let (k, _) = ks_two_sample(&[0.0f64, 0.1], &[5.0, 6.0]).unwrap();
    assert_eq!(k, 1.0);
    assert!(ks_pvalue(1.0f64, 1000, 1000) > 0.0);
    assert!(ks_two_sample::<f64>(&[], &[1.0]).is_err());
    assert!(ks_two_sample(&[f64::NAN], &[1.0]).is_err());
}

#[test]
fn wasserstein_example() {
    let w = wasserstein_1d(&[0.0f64, 1.0], &[0.5, 1.5]).unwrap();
    assert!((w - 0.5).abs() < 1e-15);
}

#[test]
fn percentile_interpolates_inclusively() {
    let v = [4.0f64, 1.0, 3.0, 2.0];
    assert_eq!(percentile(&v, 50.0).unwrap(), 2.5);
    assert_eq!(percentile(&v, 75.0).unwrap(), 3.25);
    assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
    assert_eq!(percentile(&v, 100.0).unwrap(), 4.0);
    assert!(percentile(&v, 101.0).is_err());
}

#[test]
fn roc_curve_spans_unit_square() {
    let scores = [0.9f64, 0.8, 0.8, 0.3, 0.1];
    let labels = [1u8, 0, 1, 0, 0];
    let roc = roc_curve(&scores, &labels).unwrap();
    let first = roc.first().unwrap();
    let last = roc.last().unwrap();
    assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
    assert!(first.threshold.is_infinite());
    assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    for w in roc.windows(2) {
        assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
    }
    let area: f64 = roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    assert!((area - auc_roc(&scores, &labels).unwrap()).abs() < 1e-12);
}

#[test]
fn single_class_auc_rejected() {
    assert!(auc_roc(&[0.1f64, 0.2], &[1, 1]).is_err());
    assert!(auc_roc(&[0.1f64, 0.2], &[0, 2]).is_err());
}

#[test]
fn stratified_split_keeps_class_ratio() {
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 10 == 0)).collect();
    let (train, test) = stratified_split(&labels, 0.7, 3).unwrap();
    assert_eq!(train.len() + test.len(), 100);
    assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 7);
    assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 3);
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    assert_eq!(stratified_split(&labels, 0.7, 3).unwrap(), (train, test));
}

#[test]
fn logistic_regression_separates_shifted_gaussians() {
    let mut r = rng(4);
    let n = 400;
    let x = Matrix::from_fn(n, 2, |i, _| if i < n / 2 { 1.0 } else { -1.0 } + r.random_range(-2.0..2.0));
    let y: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    let model = fit_logreg(&x, &y, 5000).unwrap();
    assert!(model.converged);
    assert!(model.weights.iter().all(|w| *w > 0.0));
    let scores: Vec<f64> = x.iter_rows().map(|row| model.predict_proba(row)).collect();
    assert!(auc_roc(&scores, &y).unwrap() > 0.75);
}

#[test]
fn audit_of_same_distribution_is_near_chance() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let a = Matrix::from_fn(300, 3, |_, _| r.random_range(-1.0..1.0));
        let b = Matrix::from_fn(300, 3, |_, _| r.random_range(-1.0..1.0));
        let audit = detectability_audit(&a, &b, 0.7, seed).unwrap();
        assert!((0.40..=0.60).contains(&audit.auc), "seed {seed}: {}", audit.auc);
    }
}

#[test]
fn audit_detects_shifted_samples() {
    let mut r = rng(5);
    let a = Matrix::from_fn(300, 2, |_, _| r.random_range(-1.0..0.2));
    let b = Matrix::from_fn(300, 2, |_, _| r.random_range(-0.2..1.0));
    assert!(detectability_audit(&a, &b, 0.7, 0).unwrap().gap > 0.3);
}

#[test]
fn audit_needs_enough_rows() {
    let a = Matrix::<f64>::zeros(10, 2);
    assert!(detectability_audit(&a, &a, 0.7, 0).is_err());
}

#[test]
fn fidelity_report_of_identical_sets() {
    let mut r = rng(6);
    let a = Matrix::from_fn(200, 3, |_, _| r.random_range(-1.0..1.0));
    let (report, _) = fidelity_report(&a, &a, 0.0, 1).unwrap();
    report.validate().unwrap();
    assert_eq!(report.ks_median, 0.0);
    assert_eq!(report.wasserstein_median, 0.0);
    assert!(report.ks_pvalue.iter().all(|&p| p == 1.0));
}

proptest! {
    #[test]
    fn ks_is_symmetric_and_bounded(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let (k1, p1) = ks_two_sample(&a, &b).unwrap();
        let (k2, p2) = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(k1, k2);
        prop_assert_eq!(p1, p2);
        prop_assert!((0.0..=1.0).contains(&k1));
        prop_assert!(p1 > 0.0 && p1 <= 1.0);
        prop_assert_eq!(k1, brute_force_ks(&a, &b));
    }

    #[test]
    fn wasserstein_is_symmetric_and_zero_on_self(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        prop_assert!((wasserstein_1d(&a, &b).unwrap() - wasserstein_1d(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn auc_flips_with_scores(
        scores in prop::collection::vec(-1.0f64..1.0, 4..30),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let mut labels: Vec<u8> = scores.iter().map(|_| r.random_range(0..2u8)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auc_roc(&scores, &labels).unwrap();
        prop_assert!((a + auc_roc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
    }
}
