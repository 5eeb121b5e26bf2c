use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Global location `M` and SPD scale `Σ` shared by every Gaussian-based kernel.
///
/// The Cholesky factor and the inverse are computed once at construction so
/// that per-step work is only matrix-vector products.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Preconditioner {
    center: DVector<f64>,
    sigma: DMatrix<f64>,
    factor: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Preconditioner {
    /// Builds a preconditioner from a center and an SPD scale matrix.
    ///
    /// The scale must be symmetric to 1e-12 relative; it is symmetrised
    /// before factorisation so round-off in an estimated covariance does not
    /// leak into the factor.
    pub fn new(center: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::invalid("center", "dimension must be at least 1"));
        }
        if !sigma.is_square() {
            return Err(Error::NotPositiveDefinite("scale matrix is not square"));
        }
        check_dim(d, sigma.nrows())?;
        if center.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("preconditioner"));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite("scale matrix is not symmetric"));
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("Cholesky factorisation failed"))?;
        let factor = chol.l();
        if factor.diagonal().iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("singular Cholesky factor"));
        }
        let inverse = chol.inverse();
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(Self {
            center,
            sigma,
            factor,
            inverse,
        })
    }

    /// `M = 0`, `Σ = I`.
    pub fn identity(d: usize) -> Self {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d)).expect("identity is SPD")
    }

    /// `Σ = I` around an arbitrary center.
    pub fn isotropic(center: DVector<f64>, variance: f64) -> Result<Self> {
        let d = center.len();
        Self::new(center, DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower-triangular `F` with `Σ = F Fᵀ`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Squared Mahalanobis distance `Δx = (x−M)ᵀ Σ⁻¹ (x−M)`.
    pub fn delta(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.center;
        self.quad_inv(&r)
    }

    /// `uᵀ Σ⁻¹ u`.
    pub fn quad_inv(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.inverse * u))
    }

    /// `F w` for `w ~ N(0, I)`, i.e. a centred draw from `N(0, Σ)`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let w = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * w
    }

    /// Draw from `N(M, Σ)`.
    pub fn sample_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        &self.center + self.sample_noise(rng)
    }
}
