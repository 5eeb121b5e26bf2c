use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{check_input, TargetModel};
use crate::error::{check_dim, Error, Result};
use crate::transforms::Preconditioner;

/// Multivariate Student-t with `nu` degrees of freedom, location `mean` and
/// scale matrix `scale`.
#[derive(Clone, Debug)]
pub struct StudentTTarget {
    nu: f64,
    law: Preconditioner,
}

/// `U_leb(x) = ((ν + d)/2) log(1 + Δx/ν)` with `Δx` the scale-Mahalanobis
/// distance to `mean`.
pub fn student_t_target(d: usize, nu: f64, mean: DVector<f64>, scale: DMatrix<f64>) -> Result<StudentTTarget> {
    check_dim(d, mean.len())?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::invalid("nu", "degrees of freedom must be positive and finite"));
    }
    Ok(StudentTTarget {
        nu,
        law: Preconditioner::new(mean, scale)?,
    })
}

impl StudentTTarget {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mean(&self) -> &DVector<f64> {
        self.law.center()
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        self.law.sigma()
    }

    /// Covariance `ν/(ν−2) · scale`, defined for `ν > 2`.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        (self.nu > 2.0).then(|| self.law.sigma() * (self.nu / (self.nu - 2.0)))
    }

    /// Exact draw: a Gaussian scaled by an independent `(χ²_ν/ν)^{−1/2}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mix = Gamma::new(0.5 * self.nu, 2.0 / self.nu).expect("nu is positive");
        let w: f64 = mix.sample(rng);
        self.law.center() + self.law.sample_noise(rng) / w.sqrt()
    }

    fn weight(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let r = self.law.sigma_inv() * (x - self.law.center());
        let denom = self.nu + self.law.delta(x);
        (r, denom)
    }
}

impl TargetModel for StudentTTarget {
    fn dim(&self) -> usize {
        self.law.dim()
    }

    fn name(&self) -> &str {
        "student-t"
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_input(self.dim(), x)?;
        let d = self.dim() as f64;
        Ok(-0.5 * (self.nu + d) * (self.law.delta(x) / self.nu).ln_1p())
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_input(self.dim(), x)?;
        let d = self.dim() as f64;
        let (r, denom) = self.weight(x);
        Ok(r * (-(self.nu + d) / denom))
    }

    fn hess_vec(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(check_input(self.dim(), x).and_then(|_| {
            check_dim(self.dim(), u.len())?;
            let d = self.dim() as f64;
            let (r, denom) = self.weight(x);
            let su = self.law.sigma_inv() * u;
            let ru = r.dot(u);
            Ok((su - r * (2.0 * ru / denom)) * (-(self.nu + d) / denom))
        }))
    }
}
