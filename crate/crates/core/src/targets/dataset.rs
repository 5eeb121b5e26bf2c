use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviation every continuous column is rescaled to.
pub const FEATURE_SD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    /// Exactly two distinct values; left as given.
    Binary,
    /// Rescaled to mean 0 and standard deviation 0.5.
    Continuous,
}

/// Design matrix and binary response for logistic regression.
#[derive(Clone, Debug)]
pub struct DatasetTable {
    features: DMatrix<f64>,
    labels: Vec<f64>,
    names: Vec<String>,
    kinds: Vec<ColumnKind>,
}

impl DatasetTable {
    /// Validates raw columns, classifies them and rescales the continuous ones.
    ///
    /// Labels must already be 0/1. The sample standard deviation uses the
    /// `n − 1` denominator.
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = features.shape();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: names.len(),
            });
        }
        for (row, &y) in labels.iter().enumerate() {
            if y != 0.0 && y != 1.0 {
                return Err(Error::Dataset {
                    row: row + 1,
                    reason: format!("label {y} is not 0 or 1"),
                });
            }
        }
        if let Some((row, _)) = features
            .row_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Dataset {
                row: row + 1,
                reason: "non-finite feature value".into(),
            });
        }
        let mut features = features;
        let mut kinds = Vec::with_capacity(p);
        for j in 0..p {
            let mut col = features.column_mut(j);
            let distinct: BTreeSet<u64> = col.iter().map(|v| v.to_bits()).collect();
            if distinct.len() <= 1 {
                return Err(Error::DatasetColumn {
                    column: names[j].clone(),
                    reason: "column is constant (zero standard deviation)".into(),
                });
            }
            if distinct.len() == 2 {
                kinds.push(ColumnKind::Binary);
                continue;
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            if !(sd > 0.0) {
                return Err(Error::DatasetColumn {
                    column: names[j].clone(),
                    reason: "zero standard deviation".into(),
                });
            }
            col.apply(|v| *v = (*v - mean) / sd * FEATURE_SD);
            kinds.push(ColumnKind::Continuous);
        }
        Ok(Self {
            features,
            labels,
            names,
            kinds,
        })
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn columns(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    /// Writes the (scaled) table as CSV with the label in the last column.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P, label_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header)?;
        for (i, row) in self.features.row_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{}", self.labels[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn map_labels(raw: &[String]) -> Result<Vec<f64>> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    match numeric {
        Some(vals) => {
            let mut distinct: Vec<f64> = vals.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let is01 = distinct.iter().all(|&v| v == 0.0 || v == 1.0);
            if is01 {
                return Ok(vals);
            }
            if distinct.len() != 2 {
                return Err(Error::invalid("label column", "labels must take exactly two values"));
            }
            Ok(vals.iter().map(|&v| if v == distinct[0] { 0.0 } else { 1.0 }).collect())
        }
        None => {
            let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
            if distinct.len() != 2 {
                return Err(Error::invalid("label column", "labels must take exactly two values"));
            }
            let first = *distinct.iter().next().unwrap();
            Ok(raw.iter().map(|s| if s == first { 0.0 } else { 1.0 }).collect())
        }
    }
}

/// Reads a comma-separated file with a header row.
///
/// Every column except `label_column` must be numeric. The label column may
/// be numeric or textual; its two distinct values are mapped to 0 and 1 in
/// sorted order (values already in {0, 1} are kept).
pub fn load_dataset<P: AsRef<Path>>(path: P, label_column: &str) -> Result<DatasetTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Config(format!("label column `{label_column}` not found")))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = names.len();
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Dataset {
                row,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::Dataset {
                    row,
                    reason: format!("missing value in column `{}`", header[j]),
                });
            }
            if j == label_idx {
                raw_labels.push(field.to_string());
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Dataset {
                row,
                reason: format!("non-numeric value `{field}` in column `{}`", header[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Dataset {
                    row,
                    reason: format!("non-finite value in column `{}`", header[j]),
                });
            }
            values.push(v);
        }
    }
    let n = raw_labels.len();
    let labels = map_labels(&raw_labels)?;
    let features = DMatrix::from_row_slice(n, p, &values);
    DatasetTable::new(features, labels, names)
}

/// Simulated stand-in for a tabular classification dataset with `n` rows and
/// `p` features: strongly correlated, right-skewed continuous columns (every
/// seventh column binary) and labels drawn from a logistic model.
pub fn synthetic_dataset(n: usize, p: usize, seed: u64) -> Result<DatasetTable> {
    if n < 3 || p == 0 {
        return Err(Error::invalid("synthetic dataset", "need at least 3 rows and 1 column"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (0..p)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0 / (p as f64).sqrt())
        .collect();
    let mut features = DMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let common: f64 = rng.sample(StandardNormal);
        let mut eta = 0.0;
        for j in 0..p {
            let noise: f64 = rng.sample(StandardNormal);
            let v = if j % 7 == 6 {
                f64::from(u8::from(rng.random::<f64>() < 0.3))
            } else {
                (0.8 * common + 0.6 * noise).exp()
            };
            features[(i, j)] = v;
            eta += coef[j] * if j % 7 == 6 { v } else { 0.8 * common + 0.6 * noise };
        }
        let prob = 1.0 / (1.0 + (-eta).exp());
        labels.push(f64::from(u8::from(rng.random::<f64>() < prob)));
    }
    // Guarantee both label values and two values in every binary column.
    labels[0] = 0.0;
    labels[1] = 1.0;
    for j in (6..p).step_by(7) {
        features[(0, j)] = 0.0;
        features[(1, j)] = 1.0;
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    DatasetTable::new(features, labels, names)
}
