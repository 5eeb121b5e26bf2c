//! Metropolis-Hastings kernels sharing one acceptance core.
//!
//! | kernel   | reference     | proposal                                         |
//! |----------|---------------|--------------------------------------------------|
//! | `rwm`    | Lebesgue      | `N(x, sΣ)`                                       |
//! | `pcn`    | Gaussian      | autoregressive `N(M + cos h (x−M), sin²h Σ)`     |
//! | `mpcn`   | Haar mixture  | pCN with a Gamma-distributed scale               |
//! | `infhmc` | Gaussian      | leap-frog with exact rotation as the drift       |
//! | `hug`    | Lebesgue      | drift with bounces off the potential's gradient  |
//! | `hmc`    | Lebesgue      | leap-frog                                        |
//! | `wm`     | Gaussian      | weave transform                                  |
//! | `hwm`    | Haar mixture  | weave transform with a Gamma-scaled velocity     |
//!
//! Numerical trouble inside a proposal (non-finite potential or gradient, a
//! trajectory hitting the Haar-mixture singularity) rejects the proposal and
//! increments [`KernelState::failures`]; it never aborts the chain.

mod pretune;
mod tune;

pub use pretune::{adaptive_pretune, ascend_log_density, PretuneResult, PRETUNE_BURN_IN_FRACTION, PRETUNE_RIDGE};
pub use tune::{tune_acceptance, TuneResult, DEFAULT_PROBE_LEN};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, Error, Result};
use crate::targets::{grad_potential_wrt, ReferenceKind, ReferenceMeasure, TargetModel};
use crate::transforms::{hug_step, infhmc_step, leapfrog_step, weave, PhasePoint, Preconditioner, TransformParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rwm,
    Pcn,
    Mpcn,
    InfHmc,
    Hug,
    Hmc,
    Wm,
    Hwm,
}

impl KernelKind {
    pub const ALL: [KernelKind; 8] = [
        KernelKind::Rwm,
        KernelKind::Pcn,
        KernelKind::Mpcn,
        KernelKind::InfHmc,
        KernelKind::Hug,
        KernelKind::Hmc,
        KernelKind::Wm,
        KernelKind::Hwm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Rwm => "rwm",
            KernelKind::Pcn => "pcn",
            KernelKind::Mpcn => "mpcn",
            KernelKind::InfHmc => "infhmc",
            KernelKind::Hug => "hug",
            KernelKind::Hmc => "hmc",
            KernelKind::Wm => "wm",
            KernelKind::Hwm => "hwm",
        }
    }

    pub fn reference_kind(self) -> ReferenceKind {
        match self {
            KernelKind::Rwm | KernelKind::Hug | KernelKind::Hmc => ReferenceKind::Lebesgue,
            KernelKind::Pcn | KernelKind::InfHmc | KernelKind::Wm => ReferenceKind::Gaussian,
            KernelKind::Mpcn | KernelKind::Hwm => ReferenceKind::HaarMixture,
        }
    }

    /// Whether the kernel runs a multi-step trajectory (uses `L`).
    pub fn has_trajectory(self) -> bool {
        matches!(
            self,
            KernelKind::InfHmc | KernelKind::Hug | KernelKind::Hmc | KernelKind::Wm | KernelKind::Hwm
        )
    }

    /// Whether the step size is an angle (rotation-based kernels).
    pub fn uses_angle(self) -> bool {
        matches!(
            self,
            KernelKind::Pcn | KernelKind::Mpcn | KernelKind::InfHmc | KernelKind::Wm | KernelKind::Hwm
        )
    }

    /// Acceptance rate the tuner aims for by default.
    pub fn default_target_rate(self) -> f64 {
        match self {
            KernelKind::Rwm => 0.25,
            KernelKind::Pcn | KernelKind::Mpcn => 0.40,
            KernelKind::Wm | KernelKind::Hwm => 0.60,
            KernelKind::InfHmc | KernelKind::Hug | KernelKind::Hmc => 0.65,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .or(match s.as_str() {
                "inf-hmc" | "infinite-hmc" => Some(KernelKind::InfHmc),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))
    }
}

/// A kernel together with its tuning parameters and preconditioner.
#[derive(Clone, Debug)]
pub struct Kernel {
    kind: KernelKind,
    step_size: f64,
    steps: usize,
    jitter: f64,
    reference: ReferenceMeasure,
    pre: Preconditioner,
}

impl Kernel {
    /// `step_size` is the angle `h` for rotation-based kernels, the leap-frog
    /// or drift step for `hmc`/`hug`, and the proposal scale `s` for `rwm`.
    /// `steps = 0` is allowed and gives the identity proposal.
    pub fn new(kind: KernelKind, pre: Preconditioner, step_size: f64, steps: usize, jitter: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::invalid("h", format!("{step_size} must be positive and finite")));
        }
        if kind.uses_angle() && step_size >= 2.0 * PI {
            return Err(Error::invalid("h", format!("{step_size} is outside (0, 2π)")));
        }
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::invalid("jitter", format!("{jitter} is outside [0, 1)")));
        }
        let reference = match kind.reference_kind() {
            ReferenceKind::Lebesgue => ReferenceMeasure::Lebesgue,
            ReferenceKind::Gaussian => ReferenceMeasure::Gaussian(pre.clone()),
            ReferenceKind::HaarMixture => ReferenceMeasure::HaarMixture(pre.clone()),
        };
        Ok(Self {
            kind,
            step_size,
            steps,
            jitter,
            reference,
            pre,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn preconditioner(&self) -> &Preconditioner {
        &self.pre
    }

    pub fn reference(&self) -> &ReferenceMeasure {
        &self.reference
    }

    /// Same kernel with a different step size.
    pub fn with_step_size(&self, step_size: f64) -> Result<Self> {
        Kernel::new(self.kind, self.pre.clone(), step_size, self.steps, self.jitter)
    }

    /// Errors if the model cannot be paired with this kernel's reference.
    pub fn check_model<M: TargetModel + ?Sized>(&self, model: &M) -> Result<()> {
        check_dim(self.pre.dim(), model.dim())?;
        if !model.supports(self.kind.reference_kind()) {
            return Err(Error::Incompatible {
                kernel: self.kind.to_string(),
                target: model.name().to_string(),
                reason: format!("target does not support the {} reference", self.kind.reference_kind()),
            });
        }
        Ok(())
    }

    /// `(U_ref(x), −U_leb(x))` from a single model evaluation.
    fn evaluate<M: TargetModel + ?Sized>(&self, model: &M, x: &DVector<f64>) -> Result<(f64, f64)> {
        let log_like = model.log_density(x)?;
        if !log_like.is_finite() {
            return Err(Error::NonFinite("log density"));
        }
        let u = match &self.reference {
            ReferenceMeasure::Lebesgue => -log_like,
            ReferenceMeasure::Gaussian(pre) => -log_like - 0.5 * pre.delta(x),
            ReferenceMeasure::HaarMixture(pre) => {
                let delta = pre.delta(x);
                if !(delta > 0.0) {
                    return Err(Error::ReferenceSingularity);
                }
                -log_like - 0.5 * x.len() as f64 * delta.ln()
            }
        };
        Ok((u, log_like))
    }

    /// Initial chain state at `x0` with its own random stream.
    pub fn init<M: TargetModel + ?Sized>(&self, model: &M, x0: DVector<f64>, seed: u64) -> Result<KernelState> {
        self.check_model(model)?;
        check_dim(self.pre.dim(), x0.len())?;
        let (potential, log_like_leb) = self.evaluate(model, &x0)?;
        Ok(KernelState {
            x: x0,
            potential,
            log_like_leb,
            rng: ChaCha8Rng::seed_from_u64(seed),
            failures: 0,
        })
    }

    /// One Metropolis-Hastings transition, updating `state` in place.
    pub fn step<M: TargetModel + ?Sized>(&self, model: &M, state: &mut KernelState) -> Result<StepOutcome> {
        check_dim(self.pre.dim(), state.x.len())?;
        let (y, log_alpha, evaluated) = match self.propose(model, state) {
            Ok((y, extra)) => match self.evaluate(model, &y) {
                Ok((u_y, ll)) => (y, state.potential - u_y + extra, Some((u_y, ll))),
                Err(e) if e.is_numerical() => (y, f64::NAN, None),
                Err(e) => return Err(e),
            },
            Err(e) if e.is_numerical() => (state.x.clone(), f64::NAN, None),
            Err(e) => return Err(e),
        };
        let accepted = accept(log_alpha, &mut state.rng);
        let failed = log_alpha.is_nan();
        if failed {
            state.failures += 1;
        }
        let alpha = if failed { 0.0 } else { log_alpha.min(0.0).exp() };
        if accepted {
            let (u_y, ll) = evaluated.expect("accepted proposals were evaluated");
            state.x = y.clone();
            state.potential = u_y;
            state.log_like_leb = ll;
        }
        Ok(StepOutcome {
            proposal: y,
            alpha,
            accepted,
            failed,
            log_like_leb: state.log_like_leb,
        })
    }

    fn transform_params(&self, rng: &mut ChaCha8Rng) -> f64 {
        TransformParams {
            h: self.step_size,
            steps: self.steps.max(1),
            jitter: self.jitter,
        }
        .draw_h(rng)
    }

    /// Returns the proposed position and any log-ratio contribution beyond
    /// `U_ref(x) − U_ref(y)` (the kinetic energy change for Hamiltonian kernels).
    fn propose<M: TargetModel + ?Sized>(&self, model: &M, state: &mut KernelState) -> Result<(DVector<f64>, f64)> {
        let pre = &self.pre;
        let x = &state.x;
        let rng = &mut state.rng;
        let mut grad = |p: &DVector<f64>| grad_potential_wrt(model, &self.reference, p);
        match self.kind {
            KernelKind::Rwm => Ok((x + pre.sample_noise(rng) * self.step_size.sqrt(), 0.0)),
            KernelKind::Pcn => {
                let (c, s) = (self.step_size.cos(), self.step_size.sin());
                Ok((pre.center() + (x - pre.center()) * c + pre.sample_noise(rng) * s, 0.0))
            }
            KernelKind::Mpcn => {
                let g = draw_scale(pre, x, rng)?;
                let (c, s) = (self.step_size.cos(), self.step_size.sin());
                let y = pre.center() + (x - pre.center()) * c + pre.sample_noise(rng) * (s / g.sqrt());
                Ok((y, 0.0))
            }
            KernelKind::Wm => {
                let h = self.transform_params(rng);
                let v = pre.sample_gaussian(rng);
                let z = PhasePoint { x: x.clone(), v };
                let out = weave(&z, h, self.steps, pre, &mut grad)?;
                Ok((out.x, 0.0))
            }
            KernelKind::Hwm => {
                let g = draw_scale(pre, x, rng)?;
                let h = self.transform_params(rng);
                let v = pre.center() + pre.sample_noise(rng) / g.sqrt();
                let z = PhasePoint { x: x.clone(), v };
                let out = weave(&z, h, self.steps, pre, &mut grad)?;
                Ok((out.x, 0.0))
            }
            KernelKind::InfHmc => {
                let h = self.transform_params(rng);
                let mut z = PhasePoint {
                    x: x.clone(),
                    v: pre.sample_gaussian(rng),
                };
                let kinetic = |z: &PhasePoint| 0.5 * (pre.delta(&z.x) + pre.delta(&z.v));
                let k0 = kinetic(&z);
                for _ in 0..self.steps {
                    z = infhmc_step(&z, h, pre, &mut grad)?;
                }
                Ok((z.x.clone(), k0 - kinetic(&z)))
            }
            KernelKind::Hmc => {
                let h = self.transform_params(rng);
                let mut z = PhasePoint {
                    x: x.clone(),
                    v: pre.sample_noise(rng),
                };
                let k0 = 0.5 * pre.quad_inv(&z.v);
                let mut force = |p: &DVector<f64>| Ok(pre.sigma() * grad(p)?);
                let mut drift = |v: &DVector<f64>| Ok(v.clone());
                for _ in 0..self.steps {
                    z = leapfrog_step(&z, h, &mut force, &mut drift)?;
                }
                Ok((z.x.clone(), k0 - 0.5 * pre.quad_inv(&z.v)))
            }
            KernelKind::Hug => {
                let h = self.transform_params(rng);
                let mut z = PhasePoint {
                    x: x.clone(),
                    v: pre.sample_noise(rng),
                };
                let k0 = 0.5 * pre.quad_inv(&z.v);
                let mut drift = |v: &DVector<f64>| Ok(v.clone());
                for _ in 0..self.steps {
                    z = hug_step(&z, h, pre, &mut drift, &mut grad)?;
                }
                Ok((z.x.clone(), k0 - 0.5 * pre.quad_inv(&z.v)))
            }
        }
    }
}

/// `g ~ Gamma(shape d/2, rate Δx/2)`.
fn draw_scale<R: Rng + ?Sized>(pre: &Preconditioner, x: &DVector<f64>, rng: &mut R) -> Result<f64> {
    let delta = pre.delta(x);
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::ReferenceSingularity);
    }
    let law = Gamma::new(0.5 * x.len() as f64, 2.0 / delta).map_err(|_| Error::ReferenceSingularity)?;
    let g = law.sample(rng);
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::NonFinite("scale draw"));
    }
    Ok(g)
}

/// Draws the Haar-mixture scale `g` for position `x`, as used by `mpcn` and `hwm`.
pub fn sample_scale<R: Rng + ?Sized>(pre: &Preconditioner, x: &DVector<f64>, rng: &mut R) -> Result<f64> {
    check_dim(pre.dim(), x.len())?;
    draw_scale(pre, x, rng)
}

/// Log-density of the `mpcn` proposal `y` given `x` after integrating out
/// the Gamma scale, with respect to Lebesgue measure.
pub fn mpcn_log_proposal_density(pre: &Preconditioner, h: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    check_dim(pre.dim(), x.len())?;
    check_dim(pre.dim(), y.len())?;
    let d = x.len() as f64;
    let beta = 0.5 * pre.delta(x);
    if !(beta > 0.0) {
        return Err(Error::ReferenceSingularity);
    }
    let s2 = h.sin().powi(2);
    let mean = pre.center() + (x - pre.center()) * h.cos();
    let dist = pre.quad_inv(&(y - mean));
    let log_det: f64 = 2.0 * pre.factor().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(ln_gamma(d) - ln_gamma(0.5 * d) + 0.5 * d * beta.ln()
        - 0.5 * d * (2.0 * PI * s2).ln()
        - 0.5 * log_det
        - d * (beta + dist / (2.0 * s2)).ln())
}

/// Per-chain mutable state.
#[derive(Clone, Debug)]
pub struct KernelState {
    pub(crate) x: DVector<f64>,
    pub(crate) potential: f64,
    pub(crate) log_like_leb: f64,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) failures: u64,
}

impl KernelState {
    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    /// Potential relative to the kernel's reference measure.
    pub fn potential(&self) -> f64 {
        self.potential
    }

    /// `−U_leb(x)`.
    pub fn log_like_leb(&self) -> f64 {
        self.log_like_leb
    }

    /// Number of proposals rejected because of numerical failure.
    pub fn failures(&self) -> u64 {
        self.failures
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Result of one transition.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub proposal: DVector<f64>,
    /// `min(1, exp(log α))`; zero for failed proposals.
    pub alpha: f64,
    pub accepted: bool,
    /// The proposal was rejected because of a numerical failure.
    pub failed: bool,
    /// `−U_leb` at the state after the transition.
    pub log_like_leb: f64,
}

/// Draws one uniform `u` and accepts iff `ln u < log_alpha`. NaN rejects.
pub fn accept<R: Rng + ?Sized>(log_alpha: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    !log_alpha.is_nan() && u.ln() < log_alpha
}
