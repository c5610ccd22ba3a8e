//! Marginal fidelity (per-dimension KS and 1-Wasserstein) and
//! real-vs-synthetic detectability (logistic-regression detector, AUC).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neural::sigmoid;
use crate::qgan_train::perturb_instance;
use crate::scalar::Real;

pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_SPLIT: f64 = 0.7;

fn sorted_copy<T: Real>(name: &str, v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{name} sample is empty")));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid(format!("{name} sample contains NaN")));
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(s)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic two-sided p-value.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T]) -> Result<(T, T)> {
    let a = sorted_copy("first", a)?;
    let b = sorted_copy("second", b)?;
    let (n1, n2) = (T::count(a.len()), T::count(b.len()));
    let (mut i, mut j) = (0, 0);
    let mut stat = T::zero();
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        let gap = (T::count(i) / n1 - T::count(j) / n2).abs();
        if gap > stat {
            stat = gap;
        }
    }
    Ok((stat, ks_pvalue(stat, a.len(), b.len())))
}

/// Kolmogorov series p = 2 Σ (-1)^{k-1} exp(-2k²λ²), λ = K √(n₁n₂/(n₁+n₂)),
/// clamped to (0, 1].
pub fn ks_pvalue<T: Real>(stat: T, n1: usize, n2: usize) -> T {
    let (n1, n2) = (n1 as f64, n2 as f64);
    let lambda = stat.as_f64() * (n1 * n2 / (n1 + n2)).sqrt();
    if lambda <= 0.0 {
        return T::one();
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u32 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    let p = (2.0 * sum).clamp(f64::MIN_POSITIVE, 1.0);
    T::lit(p).max(T::min_positive_value()).min(T::one())
}

/// Exact 1-Wasserstein distance between two empirical distributions,
/// ∫ |F_a(t) - F_b(t)| dt over the pooled support.
pub fn wasserstein_1d<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    let a = sorted_copy("first", a)?;
    let b = sorted_copy("second", b)?;
    let (n1, n2) = (T::count(a.len()), T::count(b.len()));
    let mut pooled: Vec<T> = a.iter().chain(&b).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    let (mut i, mut j) = (0, 0);
    let mut area = T::zero();
    for w in pooled.windows(2) {
        let t = w[0];
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        let width = w[1] - w[0];
        if width > T::zero() {
            area += (T::count(i) / n1 - T::count(j) / n2).abs() * width;
        }
    }
    Ok(area)
}

/// Percentile with linear interpolation between closest ranks (inclusive):
/// position `q/100 · (n-1)` in the sorted values.
pub fn percentile<T: Real>(values: &[T], q: f64) -> Result<T> {
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::invalid(format!("percentile {q} outside [0, 100]")));
    }
    let s = sorted_copy("percentile", values)?;
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    Ok(s[lo] + (s[hi] - s[lo]) * frac)
}

pub fn median<T: Real>(values: &[T]) -> Result<T> {
    percentile(values, 50.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ks_median: f64,
    pub p_median: f64,
    pub w_median: f64,
    pub w_p75: f64,
}

pub fn summarize<T: Real>(ks: &[T], p: &[T], w: &[T]) -> Result<Summary> {
    Ok(Summary {
        ks_median: median(ks)?.as_f64(),
        p_median: median(p)?.as_f64(),
        w_median: median(w)?.as_f64(),
        w_p75: percentile(w, 75.0)?.as_f64(),
    })
}

// ---------------------------------------------------------------------------
// Detector

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub max_iter: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> LogRegModel<T> {
    pub fn decision(&self, x: &[T]) -> T {
        self.weights.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>() + self.bias
    }

    pub fn predict_proba(&self, x: &[T]) -> T {
        sigmoid(self.decision(x))
    }
}

pub(crate) fn check_labels(labels: &[u8], n: usize) -> Result<(usize, usize)> {
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok((pos, neg))
}

/// log(1 + e^s), stable for large |s|.
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn logreg_loss(x: &Matrix<f64>, y: &[f64], w: &[f64], b: f64) -> f64 {
    let n = x.rows() as f64;
    x.iter_rows()
        .zip(y)
        .map(|(r, &yi)| {
            let s: f64 = r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            // -y log σ(s) - (1-y) log(1-σ(s))
            yi * softplus(-s) + (1.0 - yi) * softplus(s)
        })
        .sum::<f64>()
        / n
}

/// Mean-BCE logistic regression by full-batch gradient descent with
/// Armijo backtracking from a zero start. Stops when the gradient's
/// ∞-norm falls below 1e-6 or after `max_iter` iterations.
pub fn fit_logreg<T: Real>(features: &Matrix<T>, labels: &[u8], max_iter: usize) -> Result<LogRegModel<T>> {
    check_labels(labels, features.rows())?;
    if !features.is_finite() {
        return Err(Error::invalid("detector features are not finite"));
    }
    let x: Matrix<f64> = features.cast();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let (n, d) = (x.rows() as f64, x.cols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0;
    let mut loss = logreg_loss(&x, &y, &w, b);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (r, &yi) in x.iter_rows().zip(&y) {
            let s: f64 = r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            let e = sigmoid(s) - yi;
            for (g, &v) in gw.iter_mut().zip(r) {
                *g += e * v / n;
            }
            gb += e / n;
        }
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < 1e-6 {
            converged = true;
            break;
        }
        let gsq: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
            let nb = b - step * gb;
            let nl = logreg_loss(&x, &y, &nw, nb);
            if nl <= loss - 0.5 * step * gsq || step < 1e-12 {
                w = nw;
                b = nb;
                loss = nl;
                break;
            }
            step *= 0.5;
        }
        step = (step * 2.0).min(64.0);
        iterations += 1;
    }
    Ok(LogRegModel {
        weights: w.into_iter().map(T::lit).collect(),
        bias: T::lit(b),
        max_iter,
        iterations,
        converged,
    })
}

/// Mann-Whitney AUC with ties counted as one half.
pub fn auc_roc<T: Real>(scores: &[T], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_labels(labels, scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && scores[idx[end + 1]] == scores[idx[start]] {
            end += 1;
        }
        // ranks are 1-based; tied block gets the average rank
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &k in &idx[start..=end] {
            if labels[k] == 1 {
                rank_sum_pos += avg;
            }
        }
        start = end + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points at every distinct score, from (0,0) to (1,1).
pub fn roc_curve<T: Real>(scores: &[T], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_labels(labels, scores.len())?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut pts = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        while k < idx.len() && scores[idx[k]] == s {
            if labels[idx[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        pts.push(RocPoint { threshold: s.as_f64(), fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    Ok(pts)
}

/// Seeded stratified split; returns (train, test) row indices.
pub fn stratified_split(labels: &[u8], train_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {train_ratio} outside (0,1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64) * train_ratio).round() as usize;
        let n_train = n_train.clamp(usize::from(idx.len() > 1), idx.len().saturating_sub(1).max(1));
        train.extend_from_slice(&idx[..n_train.min(idx.len())]);
        test.extend_from_slice(&idx[n_train.min(idx.len())..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub auc: f64,
    pub gap: f64,
    pub roc: Vec<RocPoint>,
}

pub const MIN_AUDIT_ROWS: usize = 20;

/// Train a logistic-regression detector on a stratified split of
/// real (label 1) vs. synthetic (label 0) rows and score it on the rest.
pub fn detectability_audit<T: Real>(
    real: &Matrix<T>,
    synthetic: &Matrix<T>,
    split_ratio: f64,
    seed: u64,
) -> Result<AuditResult> {
    if real.rows() < MIN_AUDIT_ROWS || synthetic.rows() < MIN_AUDIT_ROWS {
        return Err(Error::invalid(format!(
            "detectability audit needs at least {MIN_AUDIT_ROWS} rows per set, got {} and {}",
            real.rows(),
            synthetic.rows()
        )));
    }
    if real.cols() != synthetic.cols() {
        return Err(Error::invalid("real and synthetic widths differ"));
    }
    let x = real.vstack(synthetic)?;
    let labels: Vec<u8> = std::iter::repeat_n(1u8, real.rows()).chain(std::iter::repeat_n(0u8, synthetic.rows())).collect();
    let (train, test) = stratified_split(&labels, split_ratio, seed)?;
    let tr_y: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let te_y: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
    let model = fit_logreg(&x.select_rows(&train), &tr_y, DEFAULT_MAX_ITER)?;
    let scores: Vec<T> = test.iter().map(|&i| model.predict_proba(x.row(i))).collect();
    let auc = auc_roc(&scores, &te_y)?;
    Ok(AuditResult { auc, gap: (auc - 0.5).abs(), roc: roc_curve(&scores, &te_y)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityReport {
    pub n_real: usize,
    pub n_synthetic: usize,
    pub sigma: f64,
    pub ks: Vec<f64>,
    pub ks_pvalue: Vec<f64>,
    pub wasserstein: Vec<f64>,
    pub ks_median: f64,
    pub ks_pvalue_median: f64,
    pub wasserstein_median: f64,
    pub wasserstein_p75: f64,
    pub auc: f64,
    pub detectability_gap: f64,
}

impl FidelityReport {
    pub fn validate(&self) -> Result<()> {
        let d = self.ks.len();
        if d == 0 || self.ks_pvalue.len() != d || self.wasserstein.len() != d {
            return Err(Error::Schema("per-dimension arrays have inconsistent lengths".into()));
        }
        let ok = self.ks.iter().all(|k| (0.0..=1.0).contains(k))
            && self.ks_pvalue.iter().all(|p| *p > 0.0 && *p <= 1.0)
            && self.wasserstein.iter().all(|w| *w >= 0.0)
            && (0.0..=1.0).contains(&self.auc)
            && ((self.auc - 0.5).abs() - self.detectability_gap).abs() <= 1e-12;
        if !ok {
            return Err(Error::Schema("fidelity report values out of range".into()));
        }
        Ok(())
    }
}

/// Per-dimension KS/Wasserstein plus the detector audit. When `sigma > 0`
/// both sets are first perturbed with the training instance-noise model.
pub fn fidelity_report<T: Real>(
    real: &Matrix<T>,
    synthetic: &Matrix<T>,
    sigma: f64,
    seed: u64,
) -> Result<(FidelityReport, AuditResult)> {
    if real.cols() != synthetic.cols() || real.cols() == 0 {
        return Err(Error::invalid("real and synthetic must share a positive width"));
    }
    let (real, synthetic) = if sigma > 0.0 {
        let mut rng = crate::qgan_train::stream(seed, 7);
        let mut noisy = |m: &Matrix<T>| -> Result<Matrix<T>> {
            let mut out = Matrix::zeros(0, m.cols());
            for r in m.iter_rows() {
                out.push_row(&perturb_instance(r, T::lit(sigma), &mut rng))?;
            }
            Ok(out)
        };
        (noisy(real)?, noisy(synthetic)?)
    } else {
        (real.clone(), synthetic.clone())
    };
    let d = real.cols();
    let mut ks = Vec::with_capacity(d);
    let mut ps = Vec::with_capacity(d);
    let mut ws = Vec::with_capacity(d);
    for j in 0..d {
        let (a, b) = (real.column(j), synthetic.column(j));
        let (k, p) = ks_two_sample(&a, &b)?;
        ks.push(k.as_f64());
        ps.push(p.as_f64());
        ws.push(wasserstein_1d(&a, &b)?.as_f64());
    }
    let summary = summarize(&ks, &ps, &ws)?;
    let audit = detectability_audit(&real, &synthetic, DEFAULT_SPLIT, seed)?;
    let report = FidelityReport {
        n_real: real.rows(),
        n_synthetic: synthetic.rows(),
        sigma,
        ks,
        ks_pvalue: ps,
        wasserstein: ws,
        ks_median: summary.ks_median,
        ks_pvalue_median: summary.p_median,
        wasserstein_median: summary.w_median,
        wasserstein_p75: summary.w_p75,
        auc: audit.auc,
        detectability_gap: audit.gap,
    };
    Ok((report, audit))
}
