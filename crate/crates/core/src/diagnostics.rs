//! Effective sample size, jump distance and acceptance statistics.
//!
//! Long-run variances are estimated by non-overlapping batch means with
//! batch size `⌊√N⌋`; the incomplete tail batch is discarded.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest series the batch-means estimator accepts.
pub const MIN_SERIES_LEN: usize = 100;

/// Post-burn-in output of one chain.
#[derive(Clone, Debug)]
pub struct ChainRecord {
    /// One row per stored iteration.
    pub draws: DMatrix<f64>,
    /// `−U_leb` at each stored state.
    pub log_like_leb: Vec<f64>,
    pub accepted: Vec<bool>,
    pub wall_seconds: f64,
}

impl ChainRecord {
    pub fn new(draws: DMatrix<f64>, log_like_leb: Vec<f64>, accepted: Vec<bool>, wall_seconds: f64) -> Result<Self> {
        let n = draws.nrows();
        if log_like_leb.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: log_like_leb.len(),
            });
        }
        if accepted.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: accepted.len(),
            });
        }
        Ok(Self {
            draws,
            log_like_leb,
            accepted,
            wall_seconds,
        })
    }

    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }
}

/// One row of the benchmark tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub essl: f64,
    pub ess_min: f64,
    pub msjd: f64,
    pub essl_per_s: f64,
    pub ess_min_per_s: f64,
    pub msjd_per_s: f64,
    pub time_s: f64,
    pub ar: f64,
}

/// Column order of [`RunSummary`] in CSV output.
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "method",
    "essl",
    "ess_min",
    "msjd",
    "essl_per_s",
    "ess_min_per_s",
    "msjd_per_s",
    "time_s",
    "ar",
];

struct BatchMeans {
    n: usize,
    sample_var: f64,
    long_run_var: f64,
}

fn batch_means(series: &[f64]) -> Result<BatchMeans> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::TooShort {
            needed: MIN_SERIES_LEN,
            found: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let sample_var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if sample_var <= 0.0 || series.iter().all(|&v| v == series[0]) {
        return Err(Error::ZeroVariance);
    }
    let b = (n as f64).sqrt().floor() as usize;
    let a = n / b;
    let used = &series[..a * b];
    let grand = used.iter().sum::<f64>() / used.len() as f64;
    let ss: f64 = used
        .chunks_exact(b)
        .map(|c| (c.iter().sum::<f64>() / b as f64 - grand).powi(2))
        .sum();
    let long_run_var = b as f64 * ss / (a as f64 - 1.0);
    Ok(BatchMeans {
        n,
        sample_var,
        long_run_var,
    })
}

/// `N λ̂² / σ̂²`, clipped to `(0, N]`.
pub fn ess(series: &[f64]) -> Result<f64> {
    let bm = batch_means(series)?;
    let n = bm.n as f64;
    if bm.long_run_var <= 0.0 {
        return Ok(n);
    }
    Ok((n * bm.sample_var / bm.long_run_var).min(n))
}

/// Batch-means standard error of the sample mean, `√(σ̂²/N)`.
pub fn mcse_mean(series: &[f64]) -> Result<f64> {
    let bm = batch_means(series)?;
    Ok((bm.long_run_var / bm.n as f64).sqrt())
}

/// Smallest coordinate-wise ESS.
pub fn ess_min(record: &ChainRecord) -> Result<f64> {
    if record.dim() == 0 {
        return Err(Error::invalid("record", "no coordinates"));
    }
    let mut best = f64::INFINITY;
    for col in record.draws.column_iter() {
        let series: Vec<f64> = col.iter().copied().collect();
        best = best.min(ess(&series)?);
    }
    Ok(best)
}

/// ESS of the Lebesgue log-density trace.
pub fn essl(record: &ChainRecord) -> Result<f64> {
    ess(&record.log_like_leb)
}

/// Mean squared Euclidean jump between consecutive stored draws.
pub fn msjd(record: &ChainRecord) -> Result<f64> {
    let n = record.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, found: n });
    }
    let mut total = 0.0;
    for i in 1..n {
        total += (record.draws.row(i) - record.draws.row(i - 1)).norm_squared();
    }
    Ok(total / (n - 1) as f64)
}

/// Assembles a table row; per-second rates divide by the record's wall time.
pub fn summarize(record: &ChainRecord, method: &str) -> Result<RunSummary> {
    let essl = essl(record)?;
    let ess_min = ess_min(record)?;
    let msjd = msjd(record)?;
    let time_s = record.wall_seconds;
    let rate = |v: f64| if time_s > 0.0 { v / time_s } else { 0.0 };
    Ok(RunSummary {
        method: method.to_string(),
        essl,
        ess_min,
        msjd,
        essl_per_s: rate(essl),
        ess_min_per_s: rate(ess_min),
        msjd_per_s: rate(msjd),
        time_s,
        ar: record.acceptance_rate(),
    })
}

/// Writes summaries as CSV with a header row.
pub fn write_summaries_csv<W: Write>(out: W, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(SUMMARY_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes summaries as a JSON array.
pub fn write_summaries_json<W: Write>(out: W, rows: &[RunSummary]) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}
