use std::f64::consts::FRAC_PI_2;

use super::{Kernel, KernelKind, KernelState};
use crate::error::{Error, Result};
use crate::targets::TargetModel;

/// Length of each acceptance-rate probe.
pub const DEFAULT_PROBE_LEN: usize = 10_000;
const MAX_PROBES: usize = 30;

/// Outcome of [`tune_acceptance`].
#[derive(Clone, Debug)]
pub struct TuneResult {
    pub step_size: f64,
    /// Acceptance rate measured by the probe at `step_size`.
    pub rate: f64,
    /// False when the target rate could not be reached; `step_size` is then
    /// the closest probe.
    pub within_tolerance: bool,
    pub probes: usize,
    /// Chain state after the last probe.
    pub state: KernelState,
}

fn search_range(kind: KernelKind) -> (f64, f64) {
    match kind {
        KernelKind::Pcn | KernelKind::Mpcn | KernelKind::InfHmc | KernelKind::Wm | KernelKind::Hwm => (1e-3, FRAC_PI_2),
        KernelKind::Rwm => (1e-4, 1e2),
        KernelKind::Hug | KernelKind::Hmc => (1e-4, 10.0),
    }
}

fn probe<M: TargetModel + ?Sized>(kernel: &Kernel, model: &M, state: &mut KernelState, len: usize) -> Result<f64> {
    let mut accepted = 0usize;
    for _ in 0..len {
        if kernel.step(model, state)?.accepted {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / len as f64)
}

/// Stochastic bisection on the log step size.
///
/// Each probe runs `probe_len` transitions continuing the chain from the
/// previous probe; the step size is moved up when the measured rate is above
/// `target_rate` and down otherwise, until a probe lands within `tolerance`.
pub fn tune_acceptance<M: TargetModel + ?Sized>(
    kernel: &Kernel,
    model: &M,
    mut state: KernelState,
    target_rate: f64,
    tolerance: f64,
    probe_len: usize,
) -> Result<TuneResult> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::invalid("target rate", "must lie in (0, 1)"));
    }
    if !(tolerance > 0.0) || probe_len == 0 {
        return Err(Error::invalid("tolerance", "tolerance and probe length must be positive"));
    }
    let (lo, hi) = search_range(kernel.kind());
    let (mut lo, mut hi) = (lo.ln(), hi.ln());
    let mut guess = kernel.step_size().clamp(lo.exp(), hi.exp()).ln();
    let mut best = (f64::INFINITY, kernel.step_size(), 0.0);
    for n in 1..=MAX_PROBES {
        let step = guess.exp();
        let trial = kernel.with_step_size(step)?;
        let rate = probe(&trial, model, &mut state, probe_len)?;
        let gap = (rate - target_rate).abs();
        if gap < best.0 {
            best = (gap, step, rate);
        }
        if gap <= tolerance {
            return Ok(TuneResult {
                step_size: step,
                rate,
                within_tolerance: true,
                probes: n,
                state,
            });
        }
        if rate > target_rate {
            lo = guess;
        } else {
            hi = guess;
        }
        guess = 0.5 * (lo + hi);
    }
    Ok(TuneResult {
        step_size: best.1,
        rate: best.2,
        within_tolerance: false,
        probes: MAX_PROBES,
        state,
    })
}
