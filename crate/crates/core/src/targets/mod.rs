//! Benchmark posteriors and change-of-reference bookkeeping.
//!
//! Every model exposes its log-density with respect to Lebesgue measure,
//! `−U_leb(x)`, up to an additive constant. Kernels that work relative to a
//! Gaussian or Haar-mixture reference measure obtain their own potential via
//! [`potential_wrt`] and [`grad_potential_wrt`]:
//!
//! | reference            | potential                         |
//! |----------------------|-----------------------------------|
//! | Lebesgue             | `U_leb(x)`                        |
//! | Gaussian `N(M, Σ)`   | `U_leb(x) − Δx / 2`               |
//! | Haar mixture         | `U_leb(x) − (d/2) log Δx`         |
//!
//! with `Δx = (x − M)ᵀ Σ⁻¹ (x − M)`. Data-independent normalising constants
//! are dropped throughout; everything that depends on `x` is kept.

mod dataset;
mod gaussian;
mod logistic;
mod sde;
mod student_t;
mod sv;

pub use dataset::{load_dataset, synthetic_dataset, ColumnKind, DatasetTable};
pub use gaussian::{gaussian_target, GaussianTarget};
pub use logistic::{logistic_target, LogisticTarget};
pub use sde::{sde_simulate, sde_target, wishart_scale, SdeTarget, SDE_PRIOR_DOF, SDE_PRIOR_SCALE, SDE_V_WEIGHT};
pub use student_t::{student_t_target, StudentTTarget};
pub use sv::{sv_simulate, sv_target, SvParameterPrior, SvSimulation, SvTarget};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::transforms::Preconditioner;

/// The dominating measure a potential is expressed against.
#[derive(Clone, Debug)]
pub enum ReferenceMeasure {
    Lebesgue,
    Gaussian(Preconditioner),
    /// Density `∝ (Δx)^{−d/2}` with respect to Lebesgue measure.
    HaarMixture(Preconditioner),
}

/// Discriminant of [`ReferenceMeasure`], used for compatibility checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceKind {
    Lebesgue,
    Gaussian,
    HaarMixture,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 3] = [
        ReferenceKind::Lebesgue,
        ReferenceKind::Gaussian,
        ReferenceKind::HaarMixture,
    ];
}

impl std::fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReferenceKind::Lebesgue => "lebesgue",
            ReferenceKind::Gaussian => "gaussian",
            ReferenceKind::HaarMixture => "haar-mixture",
        })
    }
}

impl ReferenceMeasure {
    pub fn kind(&self) -> ReferenceKind {
        match self {
            ReferenceMeasure::Lebesgue => ReferenceKind::Lebesgue,
            ReferenceMeasure::Gaussian(_) => ReferenceKind::Gaussian,
            ReferenceMeasure::HaarMixture(_) => ReferenceKind::HaarMixture,
        }
    }

    pub fn preconditioner(&self) -> Option<&Preconditioner> {
        match self {
            ReferenceMeasure::Lebesgue => None,
            ReferenceMeasure::Gaussian(p) | ReferenceMeasure::HaarMixture(p) => Some(p),
        }
    }
}

/// A target distribution given by its Lebesgue log-density.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// `−U_leb(x)` up to an additive constant.
    fn log_density(&self, x: &DVector<f64>) -> Result<f64>;

    /// Gradient of [`TargetModel::log_density`].
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Hessian of the log-density applied to `u`, if available in closed form.
    fn hess_vec(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Which reference measures this model may be paired with.
    fn supports(&self, _kind: ReferenceKind) -> bool {
        true
    }

    /// A crude point in the bulk of the target, used to start pre-tuning.
    fn initial_point(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    /// `U_leb(x)`.
    fn potential(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(-self.log_density(x)?)
    }

    /// `∇U_leb(x)`.
    fn grad_potential(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-self.grad_log_density(x)?)
    }
}

impl<T: TargetModel + ?Sized> TargetModel for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        (**self).log_density(x)
    }
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).grad_log_density(x)
    }
    fn hess_vec(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        (**self).hess_vec(x, u)
    }
    fn supports(&self, kind: ReferenceKind) -> bool {
        (**self).supports(kind)
    }
    fn initial_point(&self) -> DVector<f64> {
        (**self).initial_point()
    }
}

pub(crate) fn check_input(dim: usize, x: &DVector<f64>) -> Result<()> {
    check_dim(dim, x.len())?;
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("model input"));
    }
    Ok(())
}

fn haar_delta(pre: &Preconditioner, x: &DVector<f64>) -> Result<f64> {
    let delta = pre.delta(x);
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::ReferenceSingularity);
    }
    Ok(delta)
}

/// Potential of `model` relative to `reference` at `x`.
pub fn potential_wrt<M: TargetModel + ?Sized>(
    model: &M,
    reference: &ReferenceMeasure,
    x: &DVector<f64>,
) -> Result<f64> {
    let u = model.potential(x)?;
    match reference {
        ReferenceMeasure::Lebesgue => Ok(u),
        ReferenceMeasure::Gaussian(pre) => Ok(u - 0.5 * pre.delta(x)),
        ReferenceMeasure::HaarMixture(pre) => {
            let delta = haar_delta(pre, x)?;
            Ok(u - 0.5 * x.len() as f64 * delta.ln())
        }
    }
}

/// Gradient of [`potential_wrt`] in `x`.
pub fn grad_potential_wrt<M: TargetModel + ?Sized>(
    model: &M,
    reference: &ReferenceMeasure,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let g = model.grad_potential(x)?;
    match reference {
        ReferenceMeasure::Lebesgue => Ok(g),
        ReferenceMeasure::Gaussian(pre) => Ok(g - pre.sigma_inv() * (x - pre.center())),
        ReferenceMeasure::HaarMixture(pre) => {
            let delta = haar_delta(pre, x)?;
            let d = x.len() as f64;
            Ok(g - pre.sigma_inv() * (x - pre.center()) * (d / delta))
        }
    }
}

/// Central finite-difference gradient of the log-density with per-coordinate
/// step `1e-5 · (1 + |xᵢ|)`.
pub fn finite_difference_gradient<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let step = 1e-5 * (1.0 + x[i].abs());
        probe[i] = x[i] + step;
        let up = model.log_density(&probe)?;
        probe[i] = x[i] - step;
        let down = model.log_density(&probe)?;
        probe[i] = x[i];
        out[i] = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// Central finite-difference Hessian-vector product of the log-density,
/// differencing the analytic gradient along `u` with step `1e-5 · (1 + |x|)`.
pub fn finite_difference_hess_vec<M: TargetModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let un = u.norm();
    if un == 0.0 {
        return Ok(DVector::zeros(x.len()));
    }
    let step = 1e-5 * (1.0 + x.norm()) / un;
    let up = model.grad_log_density(&(x + u * step))?;
    let down = model.grad_log_density(&(x - u * step))?;
    Ok((up - down) / (2.0 * step))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
