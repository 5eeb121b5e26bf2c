use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::logistic::{sigmoid, softplus};
use super::{check_input, TargetModel};
use crate::error::{Error, Result};

/// Shape parameters of the Beta prior on the autoregression coefficient.
const PHI_PRIOR: (f64, f64) = (2.0, 5.0);
/// Shape and rate of the Gamma prior on the innovation scale.
const SIGMA_PRIOR: (f64, f64) = (5.0, 0.2);

/// Prior on `(logit φ, log σ)` including the change-of-variable Jacobians:
/// `φ ~ Be(2, 5)`, `σ ~ Gamma(shape 5, rate 0.2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SvParameterPrior;

impl SvParameterPrior {
    /// Negative log prior density on the unconstrained scale, up to a constant.
    pub fn potential(&self, logit_phi: f64, log_sigma: f64) -> f64 {
        let (a, b) = PHI_PRIOR;
        let (shape, rate) = SIGMA_PRIOR;
        let log_phi = -softplus(-logit_phi);
        let log_1m_phi = -softplus(logit_phi);
        -a * log_phi - b * log_1m_phi - shape * log_sigma + rate * log_sigma.exp()
    }

    /// Gradient of [`SvParameterPrior::potential`].
    pub fn gradient(&self, logit_phi: f64, log_sigma: f64) -> (f64, f64) {
        let (a, b) = PHI_PRIOR;
        let (shape, rate) = SIGMA_PRIOR;
        let phi = sigmoid(logit_phi);
        (-a * (1.0 - phi) + b * phi, -shape + rate * log_sigma.exp())
    }
}

/// Joint posterior of the latent log-volatilities and the transformed
/// parameters, `θ = (x₀, …, x_T, logit φ, log σ)`.
///
/// Model: `x₀ = (φ/(1−φ²)) w₀`, `w₀ ~ N(0, σ²)`; `x_t = φ x_{t−1} + ε_t`,
/// `ε_t ~ N(0, σ²)`; `y_t = exp(x_t/2) w_t`, `w_t ~ N(0, 1)`.
#[derive(Clone, Debug)]
pub struct SvTarget {
    y2: Vec<f64>,
}

pub fn sv_target(y: &[f64]) -> Result<SvTarget> {
    if y.is_empty() {
        return Err(Error::invalid("T", "need at least one observation"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observations"));
    }
    Ok(SvTarget {
        y2: y.iter().map(|v| v * v).collect(),
    })
}

impl SvTarget {
    /// Number of observations `T`.
    pub fn horizon(&self) -> usize {
        self.y2.len()
    }

    /// Index of `logit φ` in `θ`; `log σ` follows it.
    pub fn parameter_offset(&self) -> usize {
        self.y2.len() + 1
    }

    fn potential_and_grad(&self, theta: &DVector<f64>, want_grad: bool) -> (f64, Option<DVector<f64>>) {
        let t_len = self.horizon();
        let x = &theta.as_slice()[..=t_len];
        let a = theta[t_len + 1];
        let b = theta[t_len + 2];
        let phi = sigmoid(a);
        let log_phi = -softplus(-a);
        let log_1m_phi = -softplus(a);
        let one_m_phi2 = (1.0 - phi) * (1.0 + phi);
        let inv_var = (-2.0 * b).exp();
        // Precision of x₀ is (1−φ²)² / (φ² σ²).
        let prec0 = one_m_phi2 * one_m_phi2 / (phi * phi) * inv_var;
        let log_s0 = log_phi + b - log_1m_phi - phi.ln_1p();

        let mut u = 0.5 * x[0] * x[0] * prec0 + log_s0;
        let mut sq_innov = 0.0;
        let mut cross = 0.0;
        for t in 1..=t_len {
            let e = x[t] - phi * x[t - 1];
            sq_innov += e * e;
            cross += e * x[t - 1];
            u += 0.5 * self.y2[t - 1] * (-x[t]).exp() + 0.5 * x[t];
        }
        u += 0.5 * sq_innov * inv_var + t_len as f64 * b;
        u += SvParameterPrior.potential(a, b);

        if !want_grad {
            return (u, None);
        }
        let mut g = DVector::zeros(theta.len());
        g[0] = x[0] * prec0;
        for t in 1..=t_len {
            let e = (x[t] - phi * x[t - 1]) * inv_var;
            g[t] += e - 0.5 * self.y2[t - 1] * (-x[t]).exp() + 0.5;
            g[t - 1] -= phi * e;
        }
        // d/dφ of the x₀ term and of log s₀.
        let dlogprec0 = -4.0 * phi / one_m_phi2 - 2.0 / phi;
        let dphi = 0.5 * x[0] * x[0] * prec0 * dlogprec0 + 1.0 / phi + 1.0 / (1.0 - phi) - 1.0 / (1.0 + phi)
            - cross * inv_var;
        let (prior_a, prior_b) = SvParameterPrior.gradient(a, b);
        g[t_len + 1] = dphi * phi * (1.0 - phi) + prior_a;
        g[t_len + 2] = -x[0] * x[0] * prec0 + 1.0 - sq_innov * inv_var + t_len as f64 + prior_b;
        (u, Some(g))
    }
}

impl TargetModel for SvTarget {
    fn dim(&self) -> usize {
        self.y2.len() + 3
    }

    fn name(&self) -> &str {
        "stochastic-volatility"
    }

    fn log_density(&self, theta: &DVector<f64>) -> Result<f64> {
        check_input(self.dim(), theta)?;
        let (u, _) = self.potential_and_grad(theta, false);
        if !u.is_finite() {
            return Err(Error::NonFinite("log density"));
        }
        Ok(-u)
    }

    fn grad_log_density(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_input(self.dim(), theta)?;
        let (_, g) = self.potential_and_grad(theta, true);
        let g = g.expect("gradient requested");
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(-g)
    }

    /// Moment estimate `x_t ≈ ln y_t² + 1.27` (the mean of `−ln w²` for
    /// standard normal `w`), `x₀ = x₁`, `φ = ½`, and `σ` the spread of that path.
    fn initial_point(&self) -> DVector<f64> {
        let t_len = self.y2.len();
        let mut theta = DVector::zeros(t_len + 3);
        for (t, &y2) in self.y2.iter().enumerate() {
            theta[t + 1] = y2.max(1e-300).ln() + LOG_CHI2_OFFSET;
        }
        theta[0] = theta[1];
        let path = theta.rows(0, t_len + 1);
        let mean = path.mean();
        let var = path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t_len + 1) as f64;
        theta[t_len + 2] = 0.5 * var.max(1e-2).ln();
        theta
    }
}

/// `−E[ln w²]` for `w ~ N(0, 1)`.
const LOG_CHI2_OFFSET: f64 = 1.270_362_845_461_478;

/// Latent path and observations of a simulated series.
#[derive(Clone, Debug, PartialEq)]
pub struct SvSimulation {
    /// `x₀, …, x_T`.
    pub latent: Vec<f64>,
    /// `y₁, …, y_T`.
    pub observations: Vec<f64>,
}

/// Simulates the volatility model forward from a seeded stream.
pub fn sv_simulate(t_len: usize, phi: f64, sigma: f64, seed: u64) -> Result<SvSimulation> {
    if !(phi > -1.0 && phi < 1.0) {
        return Err(Error::invalid("phi", "must lie in (-1, 1)"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let mut latent = Vec::with_capacity(t_len + 1);
    let mut observations = Vec::with_capacity(t_len);
    latent.push(phi / (1.0 - phi * phi) * sigma * normal());
    for t in 1..=t_len {
        let x = phi * latent[t - 1] + sigma * normal();
        latent.push(x);
        observations.push((0.5 * x).exp() * normal());
    }
    Ok(SvSimulation { latent, observations })
}
