use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{check_input, TargetModel};
use crate::error::{check_dim, Result};
use crate::transforms::Preconditioner;

/// Multivariate normal `N(mean, cov)`.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    law: Preconditioner,
}

/// `U_leb(x) = (x − mean)ᵀ cov⁻¹ (x − mean) / 2`.
pub fn gaussian_target(d: usize, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianTarget> {
    check_dim(d, mean.len())?;
    Ok(GaussianTarget {
        law: Preconditioner::new(mean, cov)?,
    })
}

impl GaussianTarget {
    pub fn mean(&self) -> &DVector<f64> {
        self.law.center()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        self.law.sigma()
    }

    /// Exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.law.sample_gaussian(rng)
    }
}

impl TargetModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.law.dim()
    }

    fn name(&self) -> &str {
        "gaussian"
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_input(self.dim(), x)?;
        Ok(-0.5 * self.law.delta(x))
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_input(self.dim(), x)?;
        Ok(-(self.law.sigma_inv() * (x - self.law.center())))
    }

    fn hess_vec(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(check_input(self.dim(), x).and_then(|_| {
            check_dim(self.dim(), u.len())?;
            Ok(-(self.law.sigma_inv() * u))
        }))
    }
}
