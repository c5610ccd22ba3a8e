//! On-disk formats: versioned JSON artifacts carrying their run provenance,
//! and plain CSV tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::{ClassicalGenerator, SmoteOrigin};
use crate::downstream::GridRow;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{FidelityReport, RocPoint};
use crate::preprocess::{LabeledTable, PreprocessModel};
use crate::qgan_train::{LossRecord, QuantumGenerator, TrainOutcome};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

/// A payload type with a stable schema name and its own consistency check.
pub trait Schema {
    const NAME: &'static str;
    fn check(&self) -> Result<()>;
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub seed: u64,
    /// Every effective configuration key, including defaults.
    pub config: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self { tool: format!("qsynth {}", env!("CARGO_PKG_VERSION")), command: command.into(), seed, config }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact<P> {
    pub schema: String,
    pub version: u32,
    pub provenance: Provenance,
    pub payload: P,
}

pub fn to_json<P: Schema + Serialize>(payload: &P, provenance: &Provenance) -> Result<String> {
    payload.check()?;
    let doc = Artifact { schema: P::NAME.to_string(), version: FORMAT_VERSION, provenance: provenance.clone(), payload };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<P: Schema + DeserializeOwned>(text: &str) -> Result<Artifact<P>> {
    let doc: Artifact<P> = serde_json::from_str(text).map_err(|e| Error::Schema(format!("{}: {e}", P::NAME)))?;
    if doc.schema != P::NAME {
        return Err(Error::Schema(format!("expected schema {}, found {}", P::NAME, doc.schema)));
    }
    if doc.version != FORMAT_VERSION {
        return Err(Error::Schema(format!("{} version {} is not supported", doc.schema, doc.version)));
    }
    doc.payload.check()?;
    Ok(doc)
}

pub fn write_json<P: Schema + Serialize>(path: &Path, payload: &P, provenance: &Provenance) -> Result<()> {
    std::fs::write(path, to_json(payload, provenance)?)?;
    Ok(())
}

pub fn read_json<P: Schema + DeserializeOwned>(path: &Path) -> Result<Artifact<P>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    from_json(&text)
}

impl<T: Real> Schema for PreprocessModel<T> {
    const NAME: &'static str = "qsynth.preprocess_model";
    fn check(&self) -> Result<()> {
        self.validate()
    }
}

fn check_outcome<T: Real, G>(o: &TrainOutcome<T, G>) -> Result<()> {
    o.discriminator.validate().map_err(|e| Error::Schema(e.to_string()))?;
    if !o.schedule.check_bounds() {
        return Err(Error::Schema("schedule outside its bounds".into()));
    }
    Ok(())
}

impl<T: Real> Schema for TrainOutcome<T, QuantumGenerator<T>> {
    const NAME: &'static str = "qsynth.checkpoint.quantum";
    fn check(&self) -> Result<()> {
        self.generator.validate().map_err(|e| Error::Schema(e.to_string()))?;
        check_outcome(self)
    }
}

impl<T: Real> Schema for TrainOutcome<T, ClassicalGenerator<T>> {
    const NAME: &'static str = "qsynth.checkpoint.classical";
    fn check(&self) -> Result<()> {
        self.generator.validate().map_err(|e| Error::Schema(e.to_string()))?;
        check_outcome(self)
    }
}

impl Schema for FidelityReport {
    const NAME: &'static str = "qsynth.fidelity_report";
    fn check(&self) -> Result<()> {
        self.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentTable {
    pub experiment: String,
    pub rows: Vec<GridRow>,
}

impl Schema for ExperimentTable {
    const NAME: &'static str = "qsynth.experiment_table";
    fn check(&self) -> Result<()> {
        for r in &self.rows {
            let p = &r.report;
            let vals = [
                p.non_fraud.precision,
                p.non_fraud.recall,
                p.non_fraud.f1,
                p.fraud.precision,
                p.fraud.recall,
                p.fraud.f1,
                p.accuracy,
                p.auc,
            ];
            if vals.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Schema(format!("{} / {}: metric outside [0,1]", r.setting, r.classifier)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteRecord {
    pub k_neighbors: usize,
    pub origins: Vec<SmoteOrigin>,
}

impl Schema for SmoteRecord {
    const NAME: &'static str = "qsynth.smote_provenance";
    fn check(&self) -> Result<()> {
        if self.origins.iter().any(|o| !(0.0..=1.0).contains(&o.weight)) {
            return Err(Error::Schema("interpolation weight outside [0,1]".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CSV

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_matrix_csv<T: Real>(path: &Path, m: &Matrix<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record((0..m.cols()).map(|j| format!("x{j}")))?;
    for r in m.iter_rows() {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric CSV with a header row; every column is read.
pub fn read_matrix_csv<T: Real>(path: &Path) -> Result<Matrix<T>> {
    let file = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(file);
    let cols = rdr.headers().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?.len();
    let mut m = Matrix::zeros(0, cols);
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), n + 2)))?;
        let row: Vec<T> = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| Error::Data(format!("{} line {}: bad number {f:?}", path.display(), n + 2)))
            })
            .collect::<Result<_>>()?;
        m.push_row(&row).map_err(|e| Error::Data(format!("{} line {}: {e}", path.display(), n + 2)))?;
    }
    Ok(m)
}

/// Bounded features followed by a `label` column.
pub fn write_labeled_csv<T: Real>(path: &Path, table: &LabeledTable<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = (0..table.features.cols()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (r, l) in table.features.iter_rows().zip(&table.labels) {
        w.write_record(r.iter().map(|v| v.to_string()).chain([l.to_string()]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labeled_csv<T: Real>(path: &Path) -> Result<LabeledTable<T>> {
    let m = read_matrix_csv::<T>(path)?;
    if m.cols() < 2 {
        return Err(Error::Data(format!("{}: need feature and label columns", path.display())));
    }
    let d = m.cols() - 1;
    let mut labels = Vec::with_capacity(m.rows());
    for (i, r) in m.iter_rows().enumerate() {
        let l = r[d];
        if l == T::zero() {
            labels.push(0);
        } else if l == T::one() {
            labels.push(1);
        } else {
            return Err(Error::Data(format!("{} line {}: label is not 0 or 1", path.display(), i + 2)));
        }
    }
    let features = Matrix::from_fn(m.rows(), d, |i, j| m.get(i, j));
    LabeledTable::new(features, labels).map_err(|e| Error::Data(e.to_string()))
}

pub fn write_records_csv<S: Serialize, W: Write>(records: &[S], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history_csv(path: &Path, history: &[LossRecord]) -> Result<()> {
    if history.is_empty() {
        let mut f = create(path)?;
        writeln!(f, "epoch,d_loss,g_loss,g_adv,g_fm,g_mm")?;
        return Ok(());
    }
    write_records_csv(history, create(path)?)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<LossRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_roc_csv(path: &Path, roc: &[RocPoint]) -> Result<()> {
    write_records_csv(roc, create(path)?)
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    crate::downstream::write_grid_csv(rows, create(path)?)
}

pub fn write_smote_csv(path: &Path, origins: &[SmoteOrigin]) -> Result<()> {
    write_records_csv(origins, create(path)?)
}
