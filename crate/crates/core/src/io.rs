//! CSV ingestion and JSON model files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GaqqError, Result};
use crate::estimator::{Dataset, ModelParams};
use crate::numerics::SymMatrix;
use crate::simulation::rng::fnv1a64;
use crate::simulation::Truth;

/// A column chosen by header name or by 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// Digits are read as a position, anything else as a name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSchema {
    pub label_column: ColumnRef,
    pub response_column: ColumnRef,
    /// `None` takes every remaining column in file order.
    pub feature_columns: Option<Vec<ColumnRef>>,
    pub has_header: bool,
}

/// What [`load_csv`] did to the raw file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    /// Raw label text for classes `1..=K`, in order.
    pub labels: Vec<String>,
    /// True when the raw labels were not already `1..=K`.
    pub remapped: bool,
    pub feature_names: Vec<String>,
    pub response_name: String,
}

/// Raw CSV cells plus header names (`col0`, `col1`, … when absent).
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    has_header: bool,
}

impl Table {
    pub fn read(path: &Path, has_header: bool) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, has_header)
    }

    pub fn parse(text: &str, has_header: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| GaqqError::Parse {
                row: i + 1,
                column: String::new(),
                message: e.to_string(),
            })?;
            rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let headers = if has_header {
            if rows.is_empty() {
                return Err(GaqqError::Schema("missing header row".into()));
            }
            rows.remove(0)
        } else {
            let width = rows.first().map_or(0, Vec::len);
            (0..width).map(|i| format!("col{i}")).collect()
        };
        Ok(Self {
            headers,
            rows,
            has_header,
        })
    }

    pub fn resolve(&self, col: &ColumnRef) -> Result<usize> {
        match col {
            ColumnRef::Index(i) if *i < self.headers.len() => Ok(*i),
            ColumnRef::Index(i) => Err(GaqqError::Schema(format!(
                "column {i} out of range ({} columns)",
                self.headers.len()
            ))),
            ColumnRef::Name(n) => self
                .headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| GaqqError::Schema(format!("no column named '{n}'"))),
        }
    }

    /// 1-based line number of data row `i` in the file.
    fn line(&self, i: usize) -> usize {
        i + 1 + usize::from(self.has_header)
    }

    fn cell(&self, i: usize, j: usize) -> Result<&str> {
        self.rows[i].get(j).map(String::as_str).ok_or_else(|| GaqqError::Parse {
            row: self.line(i),
            column: self.headers[j].clone(),
            message: "missing cell".into(),
        })
    }

    pub fn number(&self, i: usize, j: usize) -> Result<f64> {
        let raw = self.cell(i, j)?;
        let err = |message: String| GaqqError::Parse {
            row: self.line(i),
            column: self.headers[j].clone(),
            message,
        };
        let v: f64 = raw.parse().map_err(|_| err(format!("'{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(err(format!("'{raw}' is not finite")));
        }
        Ok(v)
    }

    /// Numeric block of the given columns, one row per record.
    pub fn matrix(&self, cols: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.rows.len(), cols.len());
        for i in 0..self.rows.len() {
            for (c, &j) in cols.iter().enumerate() {
                m[(i, c)] = self.number(i, j)?;
            }
        }
        Ok(m)
    }

    pub fn strings(&self, j: usize) -> Result<Vec<String>> {
        (0..self.rows.len()).map(|i| self.cell(i, j).map(str::to_string)).collect()
    }
}

/// Maps raw labels onto `1..=K`. Integer labels are ordered numerically,
/// anything else lexicographically.
pub fn remap_labels(raw: &[String]) -> Result<(Vec<usize>, Vec<String>)> {
    let numeric: Option<Vec<i64>> = raw.iter().map(|s| s.parse().ok()).collect();
    let order: Vec<String> = match &numeric {
        Some(vals) => {
            let mut uniq: Vec<i64> = vals.clone();
            uniq.sort_unstable();
            uniq.dedup();
            uniq.iter().map(i64::to_string).collect()
        }
        None => {
            let mut uniq = raw.to_vec();
            uniq.sort();
            uniq.dedup();
            uniq
        }
    };
    let index: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (s.as_str(), i + 1)).collect();
    let labels = match &numeric {
        Some(vals) => vals.iter().map(|v| index[v.to_string().as_str()]).collect(),
        None => raw.iter().map(|s| index[s.as_str()]).collect(),
    };
    Ok((labels, order))
}

pub fn load_csv(path: &Path, schema: &DataSchema) -> Result<(Dataset, LoadReport)> {
    let table = Table::read(path, schema.has_header)?;
    dataset_from_table(&table, schema)
}

pub fn dataset_from_table(table: &Table, schema: &DataSchema) -> Result<(Dataset, LoadReport)> {
    let label_col = table.resolve(&schema.label_column)?;
    let response_col = table.resolve(&schema.response_column)?;
    if label_col == response_col {
        return Err(GaqqError::Schema("label and response columns must differ".into()));
    }
    let features: Vec<usize> = match &schema.feature_columns {
        Some(cols) => cols.iter().map(|c| table.resolve(c)).collect::<Result<_>>()?,
        None => (0..table.headers.len())
            .filter(|&j| j != label_col && j != response_col)
            .collect(),
    };
    if features.is_empty() {
        return Err(GaqqError::Schema("need at least one feature column".into()));
    }
    if features.iter().any(|&j| j == label_col || j == response_col) {
        return Err(GaqqError::Schema("feature columns overlap the label or response".into()));
    }
    if table.rows.is_empty() {
        return Err(GaqqError::invalid("data file has no rows"));
    }
    let mut cols = features.clone();
    cols.push(response_col);
    let w = table.matrix(&cols)?;
    let raw = table.strings(label_col)?;
    let (labels, names) = remap_labels(&raw)?;
    if names.len() < 2 {
        return Err(GaqqError::invalid("data contain a single class"));
    }
    let remapped = names.iter().enumerate().any(|(i, s)| *s != (i + 1).to_string());
    if remapped {
        let pairs: Vec<String> = names.iter().enumerate().map(|(i, s)| format!("{s}->{}", i + 1)).collect();
        warn!("class labels remapped: {}", pairs.join(", "));
    }
    let data = Dataset::new(w, labels)?;
    let report = LoadReport {
        labels: names,
        remapped,
        feature_names: features.iter().map(|&j| table.headers[j].clone()).collect(),
        response_name: table.headers[response_col].clone(),
    };
    Ok((data, report))
}

/// Hex digest of the training matrix and labels.
pub fn data_fingerprint(data: &Dataset) -> String {
    let mut bytes = Vec::with_capacity(8 * (data.n() * data.p() + data.n()) + 16);
    bytes.extend_from_slice(&(data.n() as u64).to_le_bytes());
    bytes.extend_from_slice(&(data.p() as u64).to_le_bytes());
    for i in 0..data.n() {
        for j in 0..data.p() {
            bytes.extend_from_slice(&data.w()[(i, j)].to_bits().to_le_bytes());
        }
    }
    for &z in data.labels() {
        bytes.extend_from_slice(&(z as u64).to_le_bytes());
    }
    format!("{:016x}", fnv1a64(&bytes))
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub bic: Option<f64>,
    pub data_fingerprint: String,
}

/// On-disk model. Floats are written in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub k: usize,
    pub p: usize,
    pub pi: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    /// Row-major `p × p`.
    pub c_hat: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Raw label text of classes `1..=K`.
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    pub response_name: String,
    pub metadata: FitMetadata,
}

impl ModelFile {
    pub fn from_model(model: &ModelParams) -> Self {
        let p = model.p();
        let c = model.c_hat().as_matrix();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            k: model.k(),
            p,
            pi: model.pi().to_vec(),
            mu: model.mu().iter().map(|m| m.as_slice().to_vec()).collect(),
            c_hat: (0..p).flat_map(|i| (0..p).map(move |j| c[(i, j)])).collect(),
            lambda1: model.lambda1,
            lambda2: model.lambda2,
            labels: (1..=model.k()).map(|k| k.to_string()).collect(),
            feature_names: (0..p - 1).map(|j| format!("x{}", j + 1)).collect(),
            response_name: "y".into(),
            metadata: FitMetadata::default(),
        }
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        let schema = |m: String| GaqqError::Schema(m);
        if self.mu.len() != self.k || self.pi.len() != self.k {
            return Err(schema(format!("expected {} class means and priors", self.k)));
        }
        if self.mu.iter().any(|m| m.len() != self.p) {
            return Err(schema(format!("class means must have length {}", self.p)));
        }
        if self.c_hat.len() != self.p * self.p {
            return Err(schema(format!("c_hat must hold {} entries", self.p * self.p)));
        }
        if self.labels.len() != self.k {
            return Err(schema("need one label name per class".into()));
        }
        if self.feature_names.len() + 1 != self.p {
            return Err(schema("need one feature name per predictor".into()));
        }
        let c = DMatrix::from_row_slice(self.p, self.p, &self.c_hat);
        if c != c.transpose() {
            return Err(schema("c_hat is not symmetric".into()));
        }
        let mu = self.mu.iter().map(|m| DVector::from_column_slice(m)).collect();
        Ok(ModelParams::new(mu, SymMatrix::new(c)?, self.pi.clone())?.with_penalties(self.lambda1, self.lambda2))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| GaqqError::Schema(format!("malformed model file: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| GaqqError::Schema("model file lacks format_version".into()))?;
        if version != u64::from(MODEL_FORMAT_VERSION) {
            return Err(GaqqError::UnsupportedVersion(u32::try_from(version).unwrap_or(u32::MAX)));
        }
        serde_json::from_value(value).map_err(|e| GaqqError::Schema(format!("invalid model file: {e}")))
    }
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    fs::write(path, file.to_json())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)?;
    let file = ModelFile::from_json(&text)?;
    file.to_model()?;
    Ok(file)
}

/// Writes `data` with a header of `x1 … x{p−1}, y, label`.
pub fn write_dataset_csv<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let q = data.p() - 1;
    let mut header: Vec<String> = (1..=q).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.w().row(i).iter().map(f64::to_string).collect();
        row.push(data.labels()[i].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> GaqqError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => GaqqError::Io(io),
        other => GaqqError::Schema(format!("{other:?}")),
    }
}

/// Population parameters of a simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub mu: Vec<Vec<f64>>,
    /// Row-major.
    pub precision: Vec<f64>,
}

impl TruthFile {
    pub fn from_truth(truth: &Truth) -> Self {
        let p = truth.precision.dim();
        let c = truth.precision.as_matrix();
        Self {
            mu: truth.mu.iter().map(|m| m.as_slice().to_vec()).collect(),
            precision: (0..p).flat_map(|i| (0..p).map(move |j| c[(i, j)])).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serializes")
    }
}
