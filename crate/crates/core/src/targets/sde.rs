use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_input, TargetModel};
use crate::error::{Error, Result};
use crate::transforms::Preconditioner;

/// Coefficient of the potential `V(x) = c · log(1 + xᵀ Σ_V⁻¹ x)`.
pub const SDE_V_WEIGHT: f64 = 27.5;
/// Degrees of freedom of the Student-t prior on the location.
pub const SDE_PRIOR_DOF: f64 = 3.0;
/// Variance scale of the Student-t prior on the location.
pub const SDE_PRIOR_SCALE: f64 = 10.0;

/// Posterior over the location `α` of a gradient-drift diffusion
/// `dX = −½ ∇V(X − α) dt + dW`, observed on an equispaced grid and
/// approximated by the Euler–Maruyama likelihood.
#[derive(Clone, Debug)]
pub struct SdeTarget {
    states: Vec<DVector<f64>>,
    increments: Vec<DVector<f64>>,
    step: f64,
    metric: Preconditioner,
}

/// `path` holds `X_0, …, X_N` as rows; `step` is the grid spacing.
pub fn sde_target(path: &DMatrix<f64>, step: f64, sigma_v: DMatrix<f64>) -> Result<SdeTarget> {
    let d = path.ncols();
    if path.nrows() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: path.nrows(),
        });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("h", "time step must be positive"));
    }
    if path.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observed path"));
    }
    let metric = Preconditioner::new(DVector::zeros(d), sigma_v)?;
    let rows: Vec<DVector<f64>> = path.row_iter().map(|r| r.transpose()).collect();
    let increments = rows.windows(2).map(|w| &w[1] - &w[0]).collect();
    let mut states = rows;
    states.pop();
    Ok(SdeTarget {
        states,
        increments,
        step,
        metric,
    })
}

/// `(Σ_V⁻¹ y, yᵀ Σ_V⁻¹ y)`; the drift is `−c Σ_V⁻¹ y / (1 + q)` with `y = x − α`.
fn whiten(metric: &Preconditioner, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let u = metric.sigma_inv() * y;
    let q = u.dot(y);
    (u, q)
}

impl SdeTarget {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn intervals(&self) -> usize {
        self.increments.len()
    }

    /// Drift of the diffusion at `x` for location `alpha`.
    pub fn drift_at(&self, x: &DVector<f64>, alpha: &DVector<f64>) -> DVector<f64> {
        let (u, q) = whiten(&self.metric, &(x - alpha));
        u * (-SDE_V_WEIGHT / (1.0 + q))
    }

    fn prior(&self, alpha: &DVector<f64>) -> (f64, f64) {
        let d = alpha.len() as f64;
        let nu = SDE_PRIOR_DOF;
        let a2 = alpha.norm_squared();
        let u = 0.5 * (nu + d) * (a2 / (SDE_PRIOR_SCALE * nu)).ln_1p();
        (u, (nu + d) / (SDE_PRIOR_SCALE * nu + a2))
    }
}

impl TargetModel for SdeTarget {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn name(&self) -> &str {
        "sde"
    }

    fn log_density(&self, alpha: &DVector<f64>) -> Result<f64> {
        check_input(self.dim(), alpha)?;
        let mut u = 0.0;
        for (x, dx) in self.states.iter().zip(&self.increments) {
            let r = dx - self.drift_at(x, alpha) * self.step;
            u += r.norm_squared();
        }
        u /= 2.0 * self.step;
        Ok(-(u + self.prior(alpha).0))
    }

    fn grad_log_density(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        check_input(self.dim(), alpha)?;
        let mut g = DVector::zeros(self.dim());
        for (x, dx) in self.states.iter().zip(&self.increments) {
            let (u, q) = whiten(&self.metric, &(x - alpha));
            let s = 1.0 + q;
            let a = &u * (-SDE_V_WEIGHT / s);
            let r = dx - a * self.step;
            let sr = self.metric.sigma_inv() * &r;
            let ur = u.dot(&r);
            g -= (sr - &u * (2.0 * ur / s)) * (SDE_V_WEIGHT / s);
        }
        g += alpha * self.prior(alpha).1;
        Ok(-g)
    }
}

fn simulate(
    d: usize,
    intervals: usize,
    horizon: f64,
    alpha: &DVector<f64>,
    sigma_v: DMatrix<f64>,
    weight: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if alpha.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: alpha.len(),
        });
    }
    if intervals == 0 || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("grid", "need N ≥ 1 and a positive horizon"));
    }
    let metric = Preconditioner::new(DVector::zeros(d), sigma_v)?;
    let h = horizon / intervals as f64;
    let sqrt_h = h.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = DMatrix::zeros(intervals + 1, d);
    let mut x = DVector::zeros(d);
    for k in 1..=intervals {
        let (u, q) = whiten(&metric, &(&x - alpha));
        let a = u * (-weight / (1.0 + q));
        let noise = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        x += a * h + noise * sqrt_h;
        path.set_row(k, &x.transpose());
    }
    Ok(path)
}

/// Euler–Maruyama path `X_0 = 0, …, X_N` with unit diffusion and step
/// `h = horizon / intervals`, returned as an `(N+1) × d` matrix.
pub fn sde_simulate(
    d: usize,
    intervals: usize,
    horizon: f64,
    alpha: &DVector<f64>,
    sigma_v: DMatrix<f64>,
    seed: u64,
) -> Result<DMatrix<f64>> {
    simulate(d, intervals, horizon, alpha, sigma_v, SDE_V_WEIGHT, seed)
}

/// `GᵀG` with `G` a `df × d` matrix of independent standard normals.
pub fn wishart_scale(d: usize, df: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 || df < d {
        return Err(Error::invalid("df", "degrees of freedom must be at least the dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(df, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = g.tr_mul(&g);
    Ok((&w + w.transpose()) * 0.5)
}
