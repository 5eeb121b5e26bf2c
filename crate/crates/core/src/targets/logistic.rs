use nalgebra::{DMatrix, DVector};

use super::{check_input, DatasetTable, TargetModel};
use crate::error::{check_dim, Error, Result};

/// Bayesian logistic regression with a multivariate Cauchy prior on the
/// coefficient vector `β = (β₀, β₁, …, β_p)`, `β₀` the intercept.
#[derive(Clone, Debug)]
pub struct LogisticTarget {
    design: DMatrix<f64>,
    labels: DVector<f64>,
}

/// Builds the posterior from a scaled dataset; `d = p + 1`.
pub fn logistic_target(data: &DatasetTable) -> Result<LogisticTarget> {
    LogisticTarget::from_parts(data.features(), data.labels())
}

/// `log(1 + e^η)` without overflow.
pub(crate) fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl LogisticTarget {
    /// Uses `features` as given (no rescaling) and prepends the intercept column.
    pub fn from_parts(features: &DMatrix<f64>, labels: &[f64]) -> Result<Self> {
        let (n, p) = features.shape();
        check_dim(n, labels.len())?;
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid("labels", "must be 0 or 1"));
        }
        let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { features[(i, j - 1)] });
        Ok(Self {
            design,
            labels: DVector::from_column_slice(labels),
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    fn prior_weight(&self) -> f64 {
        0.5 * (self.dim() as f64 + 1.0)
    }
}

impl TargetModel for LogisticTarget {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn name(&self) -> &str {
        "logistic"
    }

    fn log_density(&self, beta: &DVector<f64>) -> Result<f64> {
        check_input(self.dim(), beta)?;
        let eta = &self.design * beta;
        let lik: f64 = eta
            .iter()
            .zip(self.labels.iter())
            .map(|(&e, &y)| softplus(e) - y * e)
            .sum();
        Ok(-(lik + self.prior_weight() * beta.norm_squared().ln_1p()))
    }

    fn grad_log_density(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        check_input(self.dim(), beta)?;
        let eta = &self.design * beta;
        let resid = DVector::from_fn(eta.len(), |i, _| sigmoid(eta[i]) - self.labels[i]);
        let prior = beta * (2.0 * self.prior_weight() / (1.0 + beta.norm_squared()));
        Ok(-(self.design.tr_mul(&resid) + prior))
    }

    fn hess_vec(&self, beta: &DVector<f64>, u: &DVector<f64>) -> Option<Result<DVector<f64>>> {
        Some(check_input(self.dim(), beta).and_then(|_| {
            check_dim(self.dim(), u.len())?;
            let eta = &self.design * beta;
            let xu = &self.design * u;
            let w = DVector::from_fn(eta.len(), |i, _| {
                let s = sigmoid(eta[i]);
                s * (1.0 - s) * xu[i]
            });
            let b = 1.0 + beta.norm_squared();
            let c = 2.0 * self.prior_weight();
            let prior = (u / b - beta * (2.0 * beta.dot(u) / (b * b))) * c;
            Ok(-(self.design.tr_mul(&w) + prior))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{finite_difference_gradient, finite_difference_hess_vec, relative_error, synthetic_dataset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(softplus(-800.0), 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
        assert!((softplus(1.5) - (1.0 + 1.5f64.exp()).ln()).abs() < 1e-15);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn empty_data_is_pure_prior() {
        let m = LogisticTarget::from_parts(&DMatrix::zeros(0, 2), &[]).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.grad_log_density(&DVector::zeros(3)).unwrap().amax(), 0.0);
        let beta = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let expect = -2.0 * 7f64.ln();
        assert!((m.log_density(&beta).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn single_row_matches_direct_formula() {
        let m = LogisticTarget::from_parts(&DMatrix::zeros(1, 2), &[1.0]).unwrap();
        let beta: DVector<f64> = DVector::from_vec(vec![0.7, -0.4, 1.3]);
        let b0: f64 = 0.7;
        let u = (1.0 + b0.exp()).ln() - b0 + 2.0 * (1.0 + beta.norm_squared()).ln();
        assert!((m.potential(&beta).unwrap() - u).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let data = synthetic_dataset(569, 30, 1).unwrap();
        let m = logistic_target(&data).unwrap();
        assert_eq!(m.dim(), 31);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let beta = DVector::from_fn(31, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
            let g = m.grad_log_density(&beta).unwrap();
            let err = relative_error(&g, &finite_difference_gradient(&m, &beta).unwrap());
            assert!(err <= 1e-5, "gradient rel err {err}");
            let u = DVector::from_fn(31, |_, _| rng.sample::<f64, _>(StandardNormal));
            let hv = m.hess_vec(&beta, &u).unwrap().unwrap();
            let err = relative_error(&hv, &finite_difference_hess_vec(&m, &beta, &u).unwrap());
            assert!(err <= 1e-4, "hess-vec rel err {err}");
        }
    }

    #[test]
    fn rejects_non_finite_coefficients() {
        let m = LogisticTarget::from_parts(&DMatrix::zeros(1, 1), &[0.0]).unwrap();
        assert!(m.log_density(&DVector::from_vec(vec![f64::NAN, 0.0])).is_err());
    }
}
