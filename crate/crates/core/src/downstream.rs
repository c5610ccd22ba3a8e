//! Downstream fraud classifiers and the augmentation experiments built
//! on them.
//!
//! Classifiers consume the bounded representation. The QNN zero-pads it to
//! its qubit count and angle-embeds it with RY rotations.

use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::baselines::{smote_generate, SmoteConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{auc_roc, fit_logreg, stratified_split, LogRegModel, DEFAULT_MAX_ITER};
use crate::neural::{sigmoid, Activation, AdamState, Mlp, ParamSet, LEAKY_SLOPE};
use crate::preprocess::LabeledTable;
use crate::qgan_train::{generate_samples, stream, GeneratorModel};
use crate::quantum_sim::{Axis, ParamCircuit};
use crate::scalar::Real;

pub trait Classifier<T: Real> {
    /// Probability of the positive (fraud) class.
    fn score(&self, x: &[T]) -> Result<T>;
}

impl<T: Real> Classifier<T> for LogRegModel<T> {
    fn score(&self, x: &[T]) -> Result<T> {
        if x.len() != self.weights.len() {
            return Err(Error::invalid(format!("expected {} features, got {}", self.weights.len(), x.len())));
        }
        Ok(self.predict_proba(x))
    }
}

/// A differentiable logit model trained by mini-batch BCE.
pub trait BinaryModel<T: Real>: ParamSet<T> + Clone + Classifier<T> {
    fn logit(&self, x: &[T]) -> Result<T>;

    /// Mean BCE over the batch; the mean gradient is added into `grads`.
    fn loss_and_grad(&self, x: &Matrix<T>, y: &[u8], grads: &mut Self) -> Result<T>;
}

/// y·log(1+e^{-s}) + (1-y)·log(1+e^{s}) without overflow.
pub fn bce_with_logit<T: Real>(s: T, y: u8) -> T {
    let softplus = |v: T| if v > T::zero() { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() };
    if y == 1 {
        softplus(-s)
    } else {
        softplus(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { lr: 1e-3, epochs: 30, batch_size: 64, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.batch_size == 0 {
            return Err(Error::Config("classifier lr and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("classifier Adam settings out of range".into()));
        }
        Ok(())
    }
}

fn check_training_table<T: Real>(data: &LabeledTable<T>, width: usize) -> Result<()> {
    data.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.features.cols() != width {
        return Err(Error::invalid(format!("expected {width} features, got {}", data.features.cols())));
    }
    Ok(())
}

/// Shuffled mini-batch Adam on mean BCE.
pub fn fit_binary<T: Real, M: BinaryModel<T>>(
    mut model: M,
    data: &LabeledTable<T>,
    optim: &OptimConfig,
    rng: &mut dyn RngCore,
) -> Result<M> {
    optim.validate()?;
    let lit = T::lit;
    let mut adam = AdamState::new(&model, lit(optim.lr), lit(optim.beta1), lit(optim.beta2), lit(optim.eps));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = model.clone();
    for epoch in 0..optim.epochs {
        order.shuffle(rng);
        for (b, chunk) in order.chunks(optim.batch_size).enumerate() {
            let batch = data.subset(chunk);
            grads.fill_zero();
            model
                .loss_and_grad(&batch.features, &batch.labels, &mut grads)
                .and_then(|_| adam.update(&mut model, &grads))
                .map_err(|e| e.with_context(format!("classifier epoch {epoch}, batch {b}")))?;
        }
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// QNN

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QnnConfig {
    pub qubits: usize,
    pub quantum_layers: usize,
    pub head_hidden: usize,
    pub optim: OptimConfig,
}

impl Default for QnnConfig {
    fn default() -> Self {
        Self { qubits: 6, quantum_layers: 3, head_hidden: 8, optim: OptimConfig::default() }
    }
}

/// Angle-embedded strongly entangling circuit whose Pauli-Z readouts feed a
/// one-hidden-layer head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnnClassifier<T> {
    pub num_qubits: usize,
    pub num_layers: usize,
    /// Per layer and qubit: (φ, θ, ω) of RZ(ω)RY(θ)RZ(φ).
    pub rotations: Vec<T>,
    /// Outputs a logit.
    pub head: Mlp<T>,
}

impl<T: Real> QnnClassifier<T> {
    pub fn init(config: &QnnConfig, rng: &mut dyn RngCore) -> Self {
        let n = 3 * config.qubits * config.quantum_layers;
        let rotations = (0..n).map(|_| T::lit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))).collect();
        let head = Mlp::fan_in_uniform(
            &[config.qubits, config.head_hidden, 1],
            Activation::LeakyRelu { slope: LEAKY_SLOPE },
            Activation::Identity,
            rng,
        );
        Self { num_qubits: config.qubits, num_layers: config.quantum_layers, rotations, head }
    }

    fn circuit(&self, x: &[T]) -> Result<ParamCircuit<T>> {
        if x.len() > self.num_qubits {
            return Err(Error::invalid(format!("{} features exceed {} qubits", x.len(), self.num_qubits)));
        }
        let mut c = ParamCircuit::new(self.num_qubits, self.rotations.len())?;
        for q in 0..self.num_qubits {
            c.fixed(Axis::Y, q, x.get(q).copied().unwrap_or_else(T::zero))?;
        }
        for l in 0..self.num_layers {
            for q in 0..self.num_qubits {
                let base = 3 * (l * self.num_qubits + q);
                c.param(Axis::Z, q, base)?.param(Axis::Y, q, base + 1)?.param(Axis::Z, q, base + 2)?;
            }
            c.cnot_ring(1)?;
        }
        Ok(c)
    }

    pub fn readout(&self, x: &[T]) -> Result<Vec<T>> {
        self.circuit(x)?.expectations(&self.rotations)
    }
}

impl<T: Real> ParamSet<T> for QnnClassifier<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut t = vec![("qnn.rotations".to_string(), self.rotations.as_slice())];
        t.extend(self.head.tensors().into_iter().map(|(n, v)| (format!("qnn.head.{n}"), v)));
        t
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut t = vec![("qnn.rotations".to_string(), self.rotations.as_mut_slice())];
        t.extend(self.head.tensors_mut().into_iter().map(|(n, v)| (format!("qnn.head.{n}"), v)));
        t
    }
}

impl<T: Real> Classifier<T> for QnnClassifier<T> {
    fn score(&self, x: &[T]) -> Result<T> {
        Ok(sigmoid(self.logit(x)?))
    }
}

impl<T: Real> BinaryModel<T> for QnnClassifier<T> {
    fn logit(&self, x: &[T]) -> Result<T> {
        Ok(self.head.forward(&self.readout(x)?)?[0])
    }

    fn loss_and_grad(&self, x: &Matrix<T>, y: &[u8], grads: &mut Self) -> Result<T> {
        let n = T::count(x.rows());
        let mut loss = T::zero();
        for (row, &label) in x.iter_rows().zip(y) {
            let circuit = self.circuit(row)?;
            let (z, jac) = circuit.expectations_and_jacobian(&self.rotations)?;
            let cache = self.head.forward_cached(&z)?;
            let s = cache.output()[0];
            loss += bce_with_logit(s, label) / n;
            let d_logit = (sigmoid(s) - T::count(usize::from(label))) / n;
            let d_z = self.head.backward(&cache, &[d_logit], &mut grads.head);
            for (g, d) in grads.rotations.iter_mut().zip(jac.matvec_t(&d_z)) {
                *g += d;
            }
        }
        Ok(loss)
    }
}

pub fn qnn_train<T: Real>(train: &LabeledTable<T>, config: &QnnConfig, seed: u64) -> Result<QnnClassifier<T>> {
    config.optim.validate()?;
    if config.qubits == 0 || config.quantum_layers == 0 || config.head_hidden == 0 {
        return Err(Error::Config("QNN sizes must be positive".into()));
    }
    data_fits_qubits(train, config.qubits)?;
    let model = QnnClassifier::init(config, &mut stream(seed, 0));
    fit_binary(model, train, &config.optim, &mut stream(seed, 1))
}

fn data_fits_qubits<T: Real>(train: &LabeledTable<T>, qubits: usize) -> Result<()> {
    train.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if train.features.cols() > qubits {
        return Err(Error::invalid(format!("{} features exceed {qubits} qubits", train.features.cols())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ANN

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnConfig {
    pub hidden: Vec<usize>,
    pub optim: OptimConfig,
}

impl Default for AnnConfig {
    fn default() -> Self {
        Self { hidden: vec![32, 16, 8], optim: OptimConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnClassifier<T> {
    /// Outputs a logit.
    pub net: Mlp<T>,
}

impl<T: Real> AnnClassifier<T> {
    pub fn init(input: usize, config: &AnnConfig, rng: &mut dyn RngCore) -> Self {
        let mut sizes = vec![input];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let net = Mlp::fan_in_uniform(&sizes, Activation::LeakyRelu { slope: LEAKY_SLOPE }, Activation::Identity, rng);
        Self { net }
    }
}

impl<T: Real> ParamSet<T> for AnnClassifier<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        self.net.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        self.net.tensors_mut()
    }
}

impl<T: Real> Classifier<T> for AnnClassifier<T> {
    fn score(&self, x: &[T]) -> Result<T> {
        Ok(sigmoid(self.logit(x)?))
    }
}

impl<T: Real> BinaryModel<T> for AnnClassifier<T> {
    fn logit(&self, x: &[T]) -> Result<T> {
        Ok(self.net.forward(x)?[0])
    }

    fn loss_and_grad(&self, x: &Matrix<T>, y: &[u8], grads: &mut Self) -> Result<T> {
        let n = T::count(x.rows());
        let mut loss = T::zero();
        for (row, &label) in x.iter_rows().zip(y) {
            let cache = self.net.forward_cached(row)?;
            let s = cache.output()[0];
            loss += bce_with_logit(s, label) / n;
            let d_logit = (sigmoid(s) - T::count(usize::from(label))) / n;
            self.net.backward(&cache, &[d_logit], &mut grads.net);
        }
        Ok(loss)
    }
}

pub fn ann_train<T: Real>(train: &LabeledTable<T>, config: &AnnConfig, seed: u64) -> Result<AnnClassifier<T>> {
    if config.hidden.is_empty() || config.hidden.contains(&0) {
        return Err(Error::Config("ANN hidden widths must be positive".into()));
    }
    check_training_table(train, train.features.cols())?;
    let model = AnnClassifier::init(train.features.cols(), config, &mut stream(seed, 0));
    fit_binary(model, train, &config.optim, &mut stream(seed, 1))
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierReport {
    pub confusion: Confusion,
    pub non_fraud: ClassMetrics,
    pub fraud: ClassMetrics,
    pub accuracy: f64,
    pub auc: f64,
    /// Set when some precision/recall had a zero denominator and was
    /// reported as 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ClassifierReport {
    pub fn from_confusion(c: Confusion, auc: f64) -> Self {
        let mut zero_division = false;
        let p1 = ratio(c.tp, c.tp + c.fp, &mut zero_division);
        let r1 = ratio(c.tp, c.tp + c.fn_, &mut zero_division);
        let p0 = ratio(c.tn, c.tn + c.fn_, &mut zero_division);
        let r0 = ratio(c.tn, c.tn + c.fp, &mut zero_division);
        let total = c.tp + c.fn_ + c.fp + c.tn;
        Self {
            confusion: c,
            non_fraud: ClassMetrics { precision: p0, recall: r0, f1: f1(p0, r0) },
            fraud: ClassMetrics { precision: p1, recall: r1, f1: f1(p1, r1) },
            accuracy: ratio(c.tp + c.tn, total, &mut zero_division),
            auc,
            zero_division,
        }
    }
}

/// Threshold the scores (positive when score ≥ threshold) and report
/// per-class metrics, accuracy and AUC.
pub fn evaluate_classifier<T: Real>(
    model: &dyn Classifier<T>,
    test: &LabeledTable<T>,
    threshold: f64,
) -> Result<ClassifierReport> {
    test.validate()?;
    if test.class_rows(0).is_empty() || test.class_rows(1).is_empty() {
        return Err(Error::invalid("test set must contain both classes"));
    }
    let scores: Vec<T> = test.features.iter_rows().map(|r| model.score(r)).collect::<Result<_>>()?;
    let mut c = Confusion { tp: 0, fn_: 0, fp: 0, tn: 0 };
    for (s, &y) in scores.iter().zip(&test.labels) {
        match (s.as_f64() >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (false, true) => c.fn_ += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(ClassifierReport::from_confusion(c, auc_roc(&scores, &test.labels)?))
}

// ---------------------------------------------------------------------------
// Experiments

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Qnn,
    Ann,
    LogReg,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Qnn, ClassifierKind::Ann, ClassifierKind::LogReg];
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Qnn => "qnn",
            ClassifierKind::Ann => "ann",
            ClassifierKind::LogReg => "logreg",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSettings {
    pub qnn: QnnConfig,
    pub ann: AnnConfig,
}

pub fn train_classifier<T: Real>(
    kind: ClassifierKind,
    train: &LabeledTable<T>,
    settings: &ClassifierSettings,
    seed: u64,
) -> Result<Box<dyn Classifier<T>>> {
    Ok(match kind {
        ClassifierKind::Qnn => Box::new(qnn_train(train, &settings.qnn, seed)?),
        ClassifierKind::Ann => Box::new(ann_train(train, &settings.ann, seed)?),
        ClassifierKind::LogReg => Box::new(fit_logreg(&train.features, &train.labels, DEFAULT_MAX_ITER)?),
    })
}

/// Source of synthetic minority rows in the bounded space.
pub trait Augmenter<T: Real> {
    fn synthesize(&self, n: usize, seed: u64) -> Result<Matrix<T>>;
}

pub struct GeneratorAugmenter<'a, G>(pub &'a G);

impl<T: Real, G: GeneratorModel<T>> Augmenter<T> for GeneratorAugmenter<'_, G> {
    fn synthesize(&self, n: usize, seed: u64) -> Result<Matrix<T>> {
        generate_samples(self.0, n, seed)
    }
}

pub struct SmoteAugmenter<'a, T> {
    pub minority: &'a Matrix<T>,
    pub k_neighbors: usize,
}

impl<T: Real> Augmenter<T> for SmoteAugmenter<'_, T> {
    fn synthesize(&self, n: usize, seed: u64) -> Result<Matrix<T>> {
        let cfg = SmoteConfig { k_neighbors: self.k_neighbors, n_samples: n, seed };
        Ok(smote_generate(self.minority, &cfg)?.0)
    }
}

/// Number of synthetic rows injected at `ratio` of `n_real` real rows.
pub fn synthetic_count(ratio: f64, n_real: usize) -> usize {
    (ratio * n_real as f64 + 1e-9).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DownstreamSplit<T> {
    pub train: LabeledTable<T>,
    pub test: LabeledTable<T>,
}

pub fn split_train_test<T: Real>(table: &LabeledTable<T>, train_ratio: f64, seed: u64) -> Result<DownstreamSplit<T>> {
    table.validate()?;
    let (train, test) = stratified_split(&table.labels, train_ratio, seed)?;
    Ok(DownstreamSplit { train: table.subset(&train), test: table.subset(&test) })
}

fn sample_rows(pool: &[usize], n: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let mut idx: Vec<usize> = pool.choose_multiple(rng, n.min(pool.len())).copied().collect();
    idx.sort_unstable();
    idx
}

/// All fraud rows plus an equal-size seeded sample of non-fraud rows
/// (all of them if there are fewer).
pub fn balanced_subset<T: Real>(table: &LabeledTable<T>, rng: &mut dyn RngCore) -> LabeledTable<T> {
    let fraud = table.class_rows(1);
    let mut idx = sample_rows(&table.class_rows(0), fraud.len(), rng);
    idx.extend(fraud);
    table.subset(&idx)
}

/// Training set of `fraud` rows labelled 1 plus an equal number of
/// non-fraud rows sampled from `train`.
fn with_matched_negatives<T: Real>(
    train: &LabeledTable<T>,
    fraud: &Matrix<T>,
    rng: &mut dyn RngCore,
) -> Result<LabeledTable<T>> {
    let neg = sample_rows(&train.class_rows(0), fraud.rows(), rng);
    let features = train.features.select_rows(&neg).vstack(fraud)?;
    let mut labels = vec![0u8; neg.len()];
    labels.extend(std::iter::repeat_n(1u8, fraud.rows()));
    LabeledTable::new(features, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Balanced,
    Imbalanced,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Balanced => "balanced",
            EvalMode::Imbalanced => "imbalanced",
        })
    }
}

/// Test partitions shared by every cell of an experiment.
pub struct TestSets<T> {
    pub balanced: LabeledTable<T>,
    pub natural: LabeledTable<T>,
}

impl<T: Real> TestSets<T> {
    pub fn new(test: &LabeledTable<T>, seed: u64) -> Self {
        Self { balanced: balanced_subset(test, &mut stream(seed, 11)), natural: test.clone() }
    }

    pub fn get(&self, mode: EvalMode) -> &LabeledTable<T> {
        match mode {
            EvalMode::Balanced => &self.balanced,
            EvalMode::Imbalanced => &self.natural,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub setting: String,
    pub classifier: ClassifierKind,
    pub mode: EvalMode,
    pub n_train_fraud: usize,
    pub n_synthetic: usize,
    pub report: ClassifierReport,
}

/// Flat CSV view of a [`GridRow`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCsvRow {
    pub setting: String,
    pub classifier: String,
    pub mode: String,
    pub n_train_fraud: usize,
    pub n_synthetic: usize,
    pub precision_0: f64,
    pub recall_0: f64,
    pub f1_0: f64,
    pub precision_1: f64,
    pub recall_1: f64,
    pub f1_1: f64,
    pub auc: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fn_count: usize,
    pub fp: usize,
    pub tn: usize,
    pub zero_division: bool,
}

impl From<&GridRow> for GridCsvRow {
    fn from(r: &GridRow) -> Self {
        let p = &r.report;
        Self {
            setting: r.setting.clone(),
            classifier: r.classifier.to_string(),
            mode: r.mode.to_string(),
            n_train_fraud: r.n_train_fraud,
            n_synthetic: r.n_synthetic,
            precision_0: p.non_fraud.precision,
            recall_0: p.non_fraud.recall,
            f1_0: p.non_fraud.f1,
            precision_1: p.fraud.precision,
            recall_1: p.fraud.recall,
            f1_1: p.fraud.f1,
            auc: p.auc,
            accuracy: p.accuracy,
            tp: p.confusion.tp,
            fn_count: p.confusion.fn_,
            fp: p.confusion.fp,
            tn: p.confusion.tn,
            zero_division: p.zero_division,
        }
    }
}

pub fn write_grid_csv<W: std::io::Write>(rows: &[GridRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(GridCsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

/// How the training fraud set of one experiment cell is formed.
pub enum TrainingSet<'a, T> {
    /// Natural class balance, unchanged.
    Natural,
    /// Real fraud plus equal non-fraud.
    Balanced,
    /// Real fraud plus `floor(ratio · N)` synthetic rows.
    Augmented { source: &'a dyn Augmenter<T>, ratio: f64 },
    /// `N` synthetic rows replace the real fraud entirely.
    SyntheticOnly { source: &'a dyn Augmenter<T> },
}

pub struct PreparedTrain<T> {
    pub table: LabeledTable<T>,
    pub n_train_fraud: usize,
    pub n_synthetic: usize,
}

pub fn prepare_training_set<T: Real>(
    train: &LabeledTable<T>,
    setting: &TrainingSet<'_, T>,
    seed: u64,
    synth_seed: u64,
) -> Result<PreparedTrain<T>> {
    let fraud_idx = train.class_rows(1);
    if fraud_idx.is_empty() || train.class_rows(0).is_empty() {
        return Err(Error::invalid("training split must contain both classes"));
    }
    let real_fraud = train.features.select_rows(&fraud_idx);
    let n_real = real_fraud.rows();
    let mut rng = stream(seed, 12);
    let (table, n_synthetic) = match setting {
        TrainingSet::Natural => (train.clone(), 0),
        TrainingSet::Balanced => (balanced_subset(train, &mut rng), 0),
        TrainingSet::Augmented { source, ratio } => {
            let n = synthetic_count(*ratio, n_real);
            let synth = source.synthesize(n, synth_seed)?;
            check_synthetic(&synth, n, train.features.cols())?;
            (with_matched_negatives(train, &real_fraud.vstack(&synth)?, &mut rng)?, n)
        }
        TrainingSet::SyntheticOnly { source } => {
            let synth = source.synthesize(n_real, synth_seed)?;
            check_synthetic(&synth, n_real, train.features.cols())?;
            (with_matched_negatives(train, &synth, &mut rng)?, n_real)
        }
    };
    let n_train_fraud = table.class_rows(1).len();
    Ok(PreparedTrain { table, n_train_fraud, n_synthetic })
}

fn check_synthetic<T: Real>(m: &Matrix<T>, n: usize, d: usize) -> Result<()> {
    if m.rows() != n || (n > 0 && m.cols() != d) {
        return Err(Error::invalid(format!("augmenter returned {}x{}, expected {n}x{d}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::invalid("augmenter returned non-finite rows"));
    }
    Ok(())
}

pub struct GridSetting<'a, T> {
    pub name: String,
    pub training: TrainingSet<'a, T>,
    pub modes: Vec<EvalMode>,
}

/// Train every classifier on every setting and evaluate it under the
/// requested modes.
pub fn run_grid<T: Real>(
    split: &DownstreamSplit<T>,
    settings: &[GridSetting<'_, T>],
    classifiers: &[ClassifierKind],
    classifier_settings: &ClassifierSettings,
    seed: u64,
) -> Result<Vec<GridRow>> {
    let tests = TestSets::new(&split.test, seed);
    let mut rows = Vec::new();
    for (cell, s) in settings.iter().enumerate() {
        let prepared = prepare_training_set(&split.train, &s.training, seed, synth_cell_seed(seed, cell))
            .map_err(|e| e.with_context(&s.name))?;
        for &kind in classifiers {
            let model = train_classifier(kind, &prepared.table, classifier_settings, seed)
                .map_err(|e| e.with_context(format!("{} / {kind}", s.name)))?;
            for &mode in &s.modes {
                rows.push(GridRow {
                    setting: s.name.clone(),
                    classifier: kind,
                    mode,
                    n_train_fraud: prepared.n_train_fraud,
                    n_synthetic: prepared.n_synthetic,
                    report: evaluate_classifier(model.as_ref(), tests.get(mode), 0.5)?,
                });
            }
        }
    }
    Ok(rows)
}

fn synth_cell_seed(seed: u64, cell: usize) -> u64 {
    stream(seed, 13 + cell as u64).next_u64()
}

/// Augmentation comparison: imbalanced and balanced real-data baselines,
/// then each augmenter at a 1:1 synthetic-to-real fraud ratio.
pub fn downstream_grid<T: Real>(
    split: &DownstreamSplit<T>,
    augmenters: &[(&str, &dyn Augmenter<T>)],
    classifiers: &[ClassifierKind],
    classifier_settings: &ClassifierSettings,
    seed: u64,
) -> Result<Vec<GridRow>> {
    let mut settings = vec![
        GridSetting { name: "imbalanced".into(), training: TrainingSet::Natural, modes: vec![EvalMode::Imbalanced] },
        GridSetting { name: "balanced".into(), training: TrainingSet::Balanced, modes: vec![EvalMode::Balanced] },
    ];
    for (name, source) in augmenters {
        settings.push(GridSetting {
            name: (*name).to_string(),
            training: TrainingSet::Augmented { source: *source, ratio: 1.0 },
            modes: vec![EvalMode::Balanced],
        });
    }
    run_grid(split, &settings, classifiers, classifier_settings, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "ratio")]
pub enum Injection {
    Ratio(f64),
    SyntheticOnly,
}

impl fmt::Display for Injection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Injection::Ratio(r) => write!(f, "ratio_{r}"),
            Injection::SyntheticOnly => f.write_str("synthetic_only"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingPlan {
    pub injections: Vec<Injection>,
    pub modes: Vec<EvalMode>,
    pub classifier: ClassifierKind,
    pub seed: u64,
}

impl Default for ScalingPlan {
    fn default() -> Self {
        Self {
            injections: [0.0, 0.10, 0.25, 0.50, 1.00]
                .into_iter()
                .map(Injection::Ratio)
                .chain([Injection::SyntheticOnly])
                .collect(),
            modes: vec![EvalMode::Balanced, EvalMode::Imbalanced],
            classifier: ClassifierKind::Qnn,
            seed: 0,
        }
    }
}

impl ScalingPlan {
    pub fn validate(&self) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        let mut seen_only = false;
        for inj in &self.injections {
            match *inj {
                Injection::Ratio(r) => {
                    if seen_only {
                        return Err(Error::Config("synthetic-only must come after all ratios".into()));
                    }
                    if !(r.is_finite() && r >= 0.0) || r < last {
                        return Err(Error::Config("injection ratios must be non-negative and ascending".into()));
                    }
                    last = r;
                }
                Injection::SyntheticOnly => {
                    if seen_only {
                        return Err(Error::Config("synthetic-only listed twice".into()));
                    }
                    seen_only = true;
                }
            }
        }
        if self.injections.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("scaling plan needs injections and modes".into()));
        }
        Ok(())
    }
}

/// Synthetic-injection scaling study: one classifier per injection level,
/// each scored under every evaluation mode.
pub fn scaling_experiment<T: Real>(
    split: &DownstreamSplit<T>,
    source: &dyn Augmenter<T>,
    plan: &ScalingPlan,
    classifier_settings: &ClassifierSettings,
) -> Result<Vec<GridRow>> {
    plan.validate()?;
    let settings: Vec<GridSetting<'_, T>> = plan
        .injections
        .iter()
        .map(|inj| GridSetting {
            name: inj.to_string(),
            training: match *inj {
                Injection::Ratio(r) if r == 0.0 => TrainingSet::Balanced,
                Injection::Ratio(ratio) => TrainingSet::Augmented { source, ratio },
                Injection::SyntheticOnly => TrainingSet::SyntheticOnly { source },
            },
            modes: plan.modes.clone(),
        })
        .collect();
    run_grid(split, &settings, &[plan.classifier], classifier_settings, plan.seed)
}
