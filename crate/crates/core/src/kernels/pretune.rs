use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::accept;
use crate::error::{check_dim, Error, Result};
use crate::targets::TargetModel;
use crate::transforms::Preconditioner;

/// Ridge added to the proposal covariance and to the returned scale.
pub const PRETUNE_RIDGE: f64 = 1e-8;
/// Leading fraction of the adaptive run excluded from the returned moments.
pub const PRETUNE_BURN_IN_FRACTION: f64 = 0.25;
/// Proposal variance per coordinate before adaptation starts.
const INITIAL_VARIANCE: f64 = 0.01;

/// Estimated location and scale plus where the adaptive chain ended.
#[derive(Clone, Debug)]
pub struct PretuneResult {
    pub pre: Preconditioner,
    pub final_x: DVector<f64>,
    pub acceptance_rate: f64,
}

/// Running mean and scatter matrix.
struct Moments {
    n: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(d),
            scatter: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = x - &self.mean;
        self.scatter.ger(1.0, &delta, &delta2, 1.0);
    }

    fn covariance(&self) -> DMatrix<f64> {
        let c = &self.scatter / (self.n as f64 - 1.0);
        (&c + c.transpose()) * 0.5
    }
}

/// Gradient ascent on the log density with an adaptive step, used to move a
/// crude starting point into the bulk before adaptive pre-tuning.
///
/// A step `x + t∇log π` is kept if it raises the log density, after which `t`
/// doubles; otherwise `t` halves. Stops after `max_iters` trials or once `t`
/// underflows. Never returns a point with lower density than `x0`.
pub fn ascend_log_density<M: TargetModel + ?Sized>(model: &M, x0: DVector<f64>, max_iters: usize) -> Result<DVector<f64>> {
    check_dim(model.dim(), x0.len())?;
    let mut x = x0;
    let mut lp = model.log_density(&x)?;
    if !lp.is_finite() {
        return Err(Error::NonFinite("log density at the starting point"));
    }
    let mut g = model.grad_log_density(&x)?;
    let mut t = 1e-3;
    for _ in 0..max_iters {
        if t < 1e-300 || !g.iter().all(|c| c.is_finite()) {
            break;
        }
        let y = &x + &g * t;
        match model.log_density(&y) {
            Ok(lq) if lq.is_finite() && lq > lp => {
                x = y;
                lp = lq;
                g = model.grad_log_density(&x)?;
                t *= 2.0;
            }
            Ok(_) => t *= 0.5,
            Err(e) if e.is_numerical() => t *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok(x)
}

/// Adaptive Metropolis with respect to Lebesgue measure.
///
/// For the first `2d` iterations the proposal is `N(x, 0.01·I)`; afterwards
/// it is `N(x, (2.38²/d)(C + εI))` with `C` the running covariance of all
/// states so far, updated every iteration. The proposal factor is refreshed
/// every iteration for `d ≤ 50` and every tenth iteration above that. The
/// returned scale is the covariance of the last 75% of the run plus `εI`.
pub fn adaptive_pretune<M: TargetModel + ?Sized>(
    model: &M,
    x0: DVector<f64>,
    iters: usize,
    seed: u64,
) -> Result<PretuneResult> {
    let d = model.dim();
    check_dim(d, x0.len())?;
    if iters < 10 {
        return Err(Error::invalid("pretune_iters", "need at least 10 iterations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0;
    let mut u = model.potential(&x)?;
    if !u.is_finite() {
        return Err(Error::NonFinite("potential at the starting point"));
    }
    let burn = ((iters as f64) * PRETUNE_BURN_IN_FRACTION).floor() as usize;
    let adapt_start = 2 * d;
    let refresh = if d <= 50 { 1 } else { 10 };
    let sd = 2.38 * 2.38 / d as f64;
    let eye = DMatrix::<f64>::identity(d, d);
    let mut factor = &eye * INITIAL_VARIANCE.sqrt();
    let mut all = Moments::new(d);
    let mut kept = Moments::new(d);
    let mut accepted = 0usize;
    all.push(&x);
    for t in 0..iters {
        if t >= adapt_start && (t - adapt_start) % refresh == 0 {
            let cov = (all.covariance() + &eye * PRETUNE_RIDGE) * sd;
            if let Some(chol) = cov.cholesky() {
                factor = chol.l();
            }
        }
        let w = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &x + &factor * w;
        let u_y = model.potential(&y).unwrap_or(f64::NAN);
        let log_alpha = if u_y.is_finite() { u - u_y } else { f64::NAN };
        if accept(log_alpha, &mut rng) {
            x = y;
            u = u_y;
            accepted += 1;
        }
        all.push(&x);
        if t >= burn {
            kept.push(&x);
        }
    }
    if kept.n < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: kept.n,
        });
    }
    let sigma = kept.covariance() + &eye * PRETUNE_RIDGE;
    let pre = Preconditioner::new(kept.mean.clone(), sigma)?;
    Ok(PretuneResult {
        pre,
        final_x: x,
        acceptance_rate: accepted as f64 / iters as f64,
    })
}
