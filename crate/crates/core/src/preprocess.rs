//! Feature selection, standardization, PCA and max-abs scaling of the
//! minority class into a bounded low-dimensional representation.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_OUT_DIM: usize = 4;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledTable<T> {
    pub features: Matrix<T>,
    pub labels: Vec<u8>,
}

impl<T: Real> LabeledTable<T> {
    pub fn new(features: Matrix<T>, labels: Vec<u8>) -> Result<Self> {
        let t = Self { features, labels };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.rows() {
            return Err(Error::invalid(format!(
                "{} labels for {} feature rows",
                self.labels.len(),
                self.features.rows()
            )));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!("label {} at row {i} is not binary", self.labels[i])));
        }
        if !self.features.is_finite() {
            return Err(Error::invalid("features contain non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_rows(&self, class: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self { features: self.features.select_rows(idx), labels: idx.iter().map(|&i| self.labels[i]).collect() }
    }
}

pub const ULB_COLUMNS: usize = 31;

pub fn ulb_header() -> Vec<String> {
    let mut h = vec!["Time".to_string()];
    h.extend((1..=28).map(|i| format!("V{i}")));
    h.push("Amount".into());
    h.push("Class".into());
    h
}

/// Read a credit-card transactions CSV with header
/// `Time,V1..V28,Amount,Class`.
pub fn read_ulb_csv<T: Real>(path: &Path) -> Result<LabeledTable<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_ulb(file)
}

pub fn read_ulb<T: Real, R: std::io::Read>(reader: R) -> Result<LabeledTable<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ulb_header() {
        return Err(Error::Data(format!(
            "unexpected header (want Time,V1..V28,Amount,Class): {}",
            header.join(",")
        )));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        if rec.len() != ULB_COLUMNS {
            return Err(Error::Data(format!("line {line}: {} fields, expected {ULB_COLUMNS}", rec.len())));
        }
        for (j, field) in rec.iter().take(ULB_COLUMNS - 1).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("line {line}, column {}: bad number {field:?}", header[j])))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {line}, column {}: non-finite value", header[j])));
            }
            data.push(T::lit(v));
        }
        let class = rec[ULB_COLUMNS - 1].trim().trim_matches('"');
        labels.push(match class {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Data(format!("line {line}: class {other:?} is not 0 or 1"))),
        });
    }
    let features = Matrix::from_vec(labels.len(), ULB_COLUMNS - 1, data)?;
    LabeledTable::new(features, labels)
}

/// One-way ANOVA F statistic per feature for a binary grouping.
pub fn anova_f<T: Real>(table: &LabeledTable<T>) -> Result<Vec<f64>> {
    table.validate()?;
    let n = table.len();
    let pos = table.class_rows(1);
    let neg = table.class_rows(0);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("feature scoring needs both classes"));
    }
    let df_within = n as f64 - 2.0;
    let mut scores = Vec::with_capacity(table.features.cols());
    for j in 0..table.features.cols() {
        let col: Vec<f64> = table.features.column(j).iter().map(|v| v.as_f64()).collect();
        let mean = |idx: &[usize]| idx.iter().map(|&i| col[i]).sum::<f64>() / idx.len() as f64;
        let (m1, m0) = (mean(&pos), mean(&neg));
        let grand = col.iter().sum::<f64>() / n as f64;
        let between = pos.len() as f64 * (m1 - grand).powi(2) + neg.len() as f64 * (m0 - grand).powi(2);
        let within: f64 = pos.iter().map(|&i| (col[i] - m1).powi(2)).sum::<f64>()
            + neg.iter().map(|&i| (col[i] - m0).powi(2)).sum::<f64>();
        let f = if between == 0.0 {
            0.0
        } else if within == 0.0 || df_within <= 0.0 {
            f64::INFINITY
        } else {
            between / (within / df_within)
        };
        scores.push(f);
    }
    Ok(scores)
}

/// Indices of the `k` highest-scoring features, best first; equal
/// scores keep the lower index first.
pub fn select_k_best<T: Real>(table: &LabeledTable<T>, k: usize) -> Result<Vec<usize>> {
    let d = table.features.cols();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("cannot select {k} of {d} features")));
    }
    let scores = anova_f(table)?;
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessModel<T> {
    pub selected_indices: Vec<usize>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// k × out_dim, orthonormal columns.
    pub projection: Matrix<T>,
    pub explained_variance: Vec<T>,
    pub scales: Vec<T>,
    pub epsilon: T,
}

impl<T: Real> PreprocessModel<T> {
    pub fn num_selected(&self) -> usize {
        self.selected_indices.len()
    }

    pub fn out_dim(&self) -> usize {
        self.scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_selected();
        let d = self.out_dim();
        let bad = |m: &str| Err(Error::Schema(format!("preprocess model: {m}")));
        if k == 0 || d == 0 || d > k {
            return bad("empty or inconsistent dimensions");
        }
        if self.mean.len() != k || self.std.len() != k || self.explained_variance.len() != d {
            return bad("vector lengths do not match the selection");
        }
        if self.projection.rows() != k || self.projection.cols() != d || self.projection.as_slice().len() != k * d {
            return bad("projection shape mismatch");
        }
        if !(self.epsilon > T::zero()) {
            return bad("epsilon must be positive");
        }
        if self.std.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
            return bad("standard deviations must be positive");
        }
        if self.scales.iter().any(|m| *m < self.epsilon || !m.is_finite()) {
            return bad("scales must be at least epsilon");
        }
        if self.mean.iter().any(|v| !v.is_finite()) || !self.projection.is_finite() {
            return bad("non-finite parameters");
        }
        Ok(())
    }

    /// Standardize, project and scale rows given in selected-feature
    /// space (k columns).
    pub fn transform_selected(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.num_selected() {
            return Err(Error::invalid(format!("expected {} columns, got {}", self.num_selected(), x.cols())));
        }
        let mut out = Matrix::zeros(x.rows(), self.out_dim());
        for (i, row) in x.iter_rows().enumerate() {
            let z: Vec<T> = row.iter().zip(&self.mean).zip(&self.std).map(|((&v, &m), &s)| (v - m) / s).collect();
            let p = self.projection.matvec_t(&z);
            for (j, (&pj, &mj)) in p.iter().zip(&self.scales).enumerate() {
                out.set(i, j, (pj / mj).clamp_unit());
            }
        }
        Ok(out)
    }

    /// Same as [`transform_selected`](Self::transform_selected) for rows in
    /// the original full feature space.
    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let need = self.selected_indices.iter().max().map_or(0, |m| m + 1);
        if x.cols() < need {
            return Err(Error::invalid(format!("expected at least {need} columns, got {}", x.cols())));
        }
        self.transform_selected(&select_columns(x, &self.selected_indices))
    }

    /// Map bounded rows back to selected-feature space:
    /// x = ((b ⊙ M) Wᵀ) ⊙ σ + μ.
    pub fn inverse_transform(&self, bounded: &Matrix<T>) -> Result<Matrix<T>> {
        if bounded.cols() != self.out_dim() {
            return Err(Error::invalid(format!("expected {} columns, got {}", self.out_dim(), bounded.cols())));
        }
        if !bounded.is_finite() {
            return Err(Error::invalid("bounded input is not finite"));
        }
        let mut out = Matrix::zeros(bounded.rows(), self.num_selected());
        for (i, row) in bounded.iter_rows().enumerate() {
            let scaled: Vec<T> = row.iter().zip(&self.scales).map(|(&b, &m)| b * m).collect();
            let z = self.projection.matvec(&scaled);
            for (j, zj) in z.into_iter().enumerate() {
                out.set(i, j, zj * self.std[j] + self.mean[j]);
            }
        }
        Ok(out)
    }
}

pub fn select_columns<T: Real>(x: &Matrix<T>, idx: &[usize]) -> Matrix<T> {
    Matrix::from_fn(x.rows(), idx.len(), |i, j| x.get(i, idx[j]))
}

/// Fit the bounded representation on the minority (label 1) rows.
/// Feature selection uses the whole table.
pub fn fit<T: Real>(table: &LabeledTable<T>, k: usize, out_dim: usize, eps: T) -> Result<(PreprocessModel<T>, Matrix<T>)> {
    table.validate()?;
    if !(eps > T::zero()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if out_dim == 0 || out_dim > k {
        return Err(Error::invalid(format!("output dimension {out_dim} must be in 1..={k}")));
    }
    let minority = table.class_rows(1);
    if minority.is_empty() {
        return Err(Error::invalid("minority class is empty"));
    }
    if minority.len() < out_dim + 1 {
        return Err(Error::FitFailure(format!(
            "{} minority rows, need at least {}",
            minority.len(),
            out_dim + 1
        )));
    }
    let selected = select_k_best(table, k)?;
    let x = select_columns(&table.features.select_rows(&minority), &selected);
    let n = T::count(x.rows());

    let mut mean = Vec::with_capacity(k);
    let mut std = Vec::with_capacity(k);
    for j in 0..k {
        let col = x.column(j);
        let m = col.iter().copied().sum::<T>() / n;
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n;
        let s = var.sqrt();
        let scale = T::one() + m.abs();
        if !(s > T::epsilon() * scale * T::lit(16.0)) {
            return Err(Error::FitFailure(format!(
                "selected feature {} (column {}) has zero variance in the minority class",
                j, selected[j]
            )));
        }
        mean.push(m);
        std.push(s);
    }
    let standardized = Matrix::from_fn(x.rows(), k, |i, j| (x.get(i, j) - mean[j]) / std[j]);

    let (projection, explained_variance) = principal_axes(&standardized, out_dim)?;

    let mut projected = Matrix::zeros(x.rows(), out_dim);
    for (i, row) in standardized.iter_rows().enumerate() {
        projected.row_mut(i).copy_from_slice(&projection.matvec_t(row));
    }
    let scales: Vec<T> = (0..out_dim)
        .map(|j| projected.column(j).iter().fold(T::zero(), |a, v| a.max(v.abs())).max(eps))
        .collect();
    let bounded = Matrix::from_fn(projected.rows(), out_dim, |i, j| (projected.get(i, j) / scales[j]).clamp_unit());

    let model = PreprocessModel { selected_indices: selected, mean, std, projection, explained_variance, scales, epsilon: eps };
    Ok((model, bounded))
}

/// Leading eigenvectors of the covariance XᵀX/N of already centered rows,
/// sorted by eigenvalue and sign-fixed so each column's largest-magnitude
/// entry is positive.
pub fn principal_axes<T: Real>(centered: &Matrix<T>, out_dim: usize) -> Result<(Matrix<T>, Vec<T>)> {
    let (n, k) = (centered.rows(), centered.cols());
    if n == 0 || out_dim > k {
        return Err(Error::invalid("principal axes need rows and out_dim <= columns"));
    }
    let mut cov = DMatrix::<f64>::zeros(k, k);
    for row in centered.iter_rows() {
        for a in 0..k {
            let ra = row[a].as_f64();
            for b in a..k {
                cov[(a, b)] += ra * row[b].as_f64();
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut w = Matrix::zeros(k, out_dim);
    let mut variances = Vec::with_capacity(out_dim);
    for (c, &e) in order.iter().take(out_dim).enumerate() {
        let v = eig.eigenvectors.column(e);
        let mut lead = 0;
        for r in 1..k {
            if v[r].abs() > v[lead].abs() {
                lead = r;
            }
        }
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..k {
            w.set(r, c, T::lit(sign * v[r]));
        }
        variances.push(T::lit(eig.eigenvalues[e].max(0.0)));
    }
    Ok((w, variances))
}
