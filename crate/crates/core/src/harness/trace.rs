use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::compare_limit;
use crate::error::{Error, Result};
use crate::targets::{grad_potential_wrt, ReferenceMeasure, TargetModel};
use crate::transforms::{weave_path, PhasePoint, Preconditioner};

/// Weave path of `steps` iterations with `M = 0`, `Σ = I`.
///
/// The start is drawn from `N(0, I)²` with `seed`, and the bounce normal is the
/// gradient of the potential relative to the standard normal, as inside the
/// WM kernel. Returns `(t, z)` pairs with `t = n·h`, `steps + 1` in total.
pub fn run_trace<M: TargetModel + ?Sized>(model: &M, h: f64, steps: usize, seed: u64) -> Result<Vec<(f64, PhasePoint)>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "must be positive"));
    }
    let d = model.dim();
    let pre = Preconditioner::identity(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = PhasePoint::new(pre.sample_gaussian(&mut rng), pre.sample_gaussian(&mut rng))?;
    let reference = ReferenceMeasure::Gaussian(pre.clone());
    let mut grad = |x: &DVector<f64>| grad_potential_wrt(model, &reference, x);
    let path = weave_path(&z0, h, steps, &pre, &mut grad)?;
    Ok(path.into_iter().enumerate().map(|(n, z)| (n as f64 * h, z)).collect())
}

/// Writes a trace with header `t,x1..xd,v1..vd`.
pub fn write_trace_csv<W: Write>(out: W, trace: &[(f64, PhasePoint)]) -> Result<()> {
    let d = trace.first().map_or(0, |(_, z)| z.dim());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .chain((1..=d).map(|i| format!("v{i}")))
        .collect();
    w.write_record(&header)?;
    for (t, z) in trace {
        let row: Vec<String> = std::iter::once(*t)
            .chain(z.x.iter().copied())
            .chain(z.v.iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of the limit-check table.
pub const LIMIT_COLUMNS: [&str; 5] = ["h", "e_T", "drift_max", "tangency_max", "order_estimate"];

/// One row of the limit-check table.
#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub h: f64,
    pub e_t: f64,
    /// Largest `|U(x(t)) − U(x(0))|` along the ODE solution.
    pub drift_max: f64,
    /// Largest `|ξ̄ᵀw|` along the ODE solution.
    pub tangency_max: f64,
    /// `log(e_T(h_prev)/e_T(h)) / log(h_prev/h)`; empty on the first row.
    pub order_estimate: Option<f64>,
}

/// Fixed start used by the limit check: `x = (1, ½, …, ½)`, `v` alternating
/// `−0.3, 0.8`.
fn limit_start(d: usize) -> Result<PhasePoint> {
    let x = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.5 });
    let v = DVector::from_fn(d, |i, _| if i % 2 == 0 { -0.3 } else { 0.8 });
    PhasePoint::new(x, v)
}

/// Compares the weave iterates with the limiting ODE for each `h` in `grid`.
pub fn run_limit_check<M: TargetModel + ?Sized>(model: &M, grid: &[f64], t_end: f64, dt: f64) -> Result<Vec<LimitRow>> {
    if grid.is_empty() {
        return Err(Error::Config("limit check needs at least one step size".into()));
    }
    let z0 = limit_start(model.dim())?;
    let mut rows: Vec<LimitRow> = Vec::with_capacity(grid.len());
    for &h in grid {
        let cmp = compare_limit(model, &z0, h, t_end, dt)?;
        let order_estimate = rows
            .last()
            .map(|prev| (prev.e_t / cmp.sup_error).ln() / (prev.h / h).ln());
        rows.push(LimitRow {
            h,
            e_t: cmp.sup_error,
            drift_max: cmp.ode.potential_drift,
            tangency_max: cmp.ode.tangency_drift,
            order_estimate,
        });
    }
    Ok(rows)
}

pub fn write_limit_csv<W: Write>(out: W, rows: &[LimitRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LIMIT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.h.to_string(),
            r.e_t.to_string(),
            r.drift_max.to_string(),
            r.tangency_max.to_string(),
            r.order_estimate.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
