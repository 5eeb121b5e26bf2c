//! Deterministic phase-space transforms.
//!
//! Every transform acts on a [`PhasePoint`] `z = (x, v)` and is a pure
//! function of its inputs. Gradients are injected as closures so the
//! transforms never see a target model directly.
//!
//! The weave transform is `circle ∘ bounce ∘ circle`:
//!
//! * [`circle`] rotates `(x − M, v − M)` by an angle `h`,
//! * [`bounce`] reflects `v − M` across the hyperplane that is
//!   `Σ`-orthogonal to the gradient `ξ(x)`.
//!
//! Both pieces have unit Jacobian, preserve the Gaussian product measure
//! `N(M, Σ) ⊗ N(M, Σ)` and satisfy `κ ∘ φ ∘ κ ∘ φ = id` for the velocity
//! flip `κ` taken about the center (see [`flip_about`]).

mod integrators;
mod preconditioner;

pub use integrators::{hug_step, infhmc_step, leapfrog_step};
pub use preconditioner::Preconditioner;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Below this value of `ξᵀ Σ ξ` the gradient is treated as exactly zero.
pub const ZERO_GRADIENT_THRESHOLD: f64 = 1e-300;

/// Augmented state `z = (x, v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
}

impl PhasePoint {
    pub fn new(x: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("x", "dimension must be at least 1"));
        }
        check_dim(x.len(), v.len())?;
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("phase point"));
        }
        Ok(Self { x, v })
    }

    pub fn from_slices(x: &[f64], v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(x), DVector::from_column_slice(v))
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Euclidean norm of the stacked vector `(x, v)`.
    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.v.norm_squared()).sqrt()
    }

    /// Euclidean distance between two phase points.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        ((&self.x - &other.x).norm_squared() + (&self.v - &other.v).norm_squared()).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }
}

/// Step angle, number of weave steps and optional step-size jitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    /// Angle `h` in radians.
    pub h: f64,
    /// Number of transform applications per proposal.
    pub steps: usize,
    /// Relative half-width of the per-iteration uniform jitter on `h`.
    pub jitter: f64,
}

impl TransformParams {
    pub fn new(h: f64, steps: usize, jitter: f64) -> Result<Self> {
        if !(h > 0.0 && h < 2.0 * std::f64::consts::PI) {
            return Err(Error::invalid("h", format!("{h} is outside (0, 2π)")));
        }
        if steps == 0 {
            return Err(Error::invalid("L", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::invalid("jitter", format!("{jitter} is outside [0, 1)")));
        }
        Ok(Self { h, steps, jitter })
    }

    /// The step size for one iteration. Without jitter the RNG is untouched.
    pub fn draw_h<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.jitter == 0.0 {
            self.h
        } else {
            let u: f64 = rng.random();
            self.h * (1.0 - self.jitter + 2.0 * self.jitter * u)
        }
    }
}

/// Rotation of `(x − M, v − M)` by angle `h` about the center `M`.
pub fn circle(z: &PhasePoint, h: f64, center: &DVector<f64>) -> Result<PhasePoint> {
    check_dim(z.dim(), center.len())?;
    check_dim(z.x.len(), z.v.len())?;
    let (s, c) = h.sin_cos();
    let dx = &z.x - center;
    let dv = &z.v - center;
    let x = center + &dx * c + &dv * s;
    let v = center - dx * s + dv * c;
    Ok(PhasePoint { x, v })
}

/// Preconditioned bounce `(x, v) ↦ (x, M + (I − 2Σξξᵀ/(ξᵀΣξ))(v − M))`.
///
/// When `ξᵀΣξ` falls below [`ZERO_GRADIENT_THRESHOLD`] the velocity is
/// reflected through the center, `v ↦ 2M − v`.
pub fn bounce(
    z: &PhasePoint,
    xi: &DVector<f64>,
    center: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<PhasePoint> {
    let d = z.dim();
    check_dim(d, xi.len())?;
    check_dim(d, center.len())?;
    check_dim(d, sigma.nrows())?;
    let u = &z.v - center;
    let s_xi = sigma * xi;
    let denom = xi.dot(&s_xi);
    let v = if denom.abs() < ZERO_GRADIENT_THRESHOLD || !denom.is_finite() {
        center - u
    } else {
        let coef = 2.0 * xi.dot(&u) / denom;
        center + u - s_xi * coef
    };
    Ok(PhasePoint { x: z.x.clone(), v })
}

/// Velocity flip `κ(x, v) = (x, −v)`.
pub fn flip(z: &PhasePoint) -> PhasePoint {
    PhasePoint {
        x: z.x.clone(),
        v: -&z.v,
    }
}

/// Velocity flip about a center, `(x, v) ↦ (x, 2M − v)`.
///
/// This is the involution under which the `M`-centred circle and bounce are
/// flip-reversible; it coincides with [`flip`] when `M = 0`.
pub fn flip_about(z: &PhasePoint, center: &DVector<f64>) -> PhasePoint {
    PhasePoint {
        x: z.x.clone(),
        v: center * 2.0 - &z.v,
    }
}

/// One weave step `circle ∘ bounce ∘ circle` with step angle `h`.
///
/// `grad` is evaluated once, at the position reached by the first rotation.
pub fn weave_step<F>(z: &PhasePoint, h: f64, pre: &Preconditioner, grad: &mut F) -> Result<PhasePoint>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mid = circle(z, h, pre.center())?;
    let xi = grad(&mid.x)?;
    if xi.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let bounced = bounce(&mid, &xi, pre.center(), pre.sigma())?;
    circle(&bounced, h, pre.center())
}

/// `steps`-fold weave transform. Zero steps returns the input unchanged.
pub fn weave<F>(
    z: &PhasePoint,
    h: f64,
    steps: usize,
    pre: &Preconditioner,
    grad: &mut F,
) -> Result<PhasePoint>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut cur = z.clone();
    for _ in 0..steps {
        cur = weave_step(&cur, h, pre, grad)?;
    }
    debug_assert!(cur.is_finite());
    Ok(cur)
}

/// Weave transform recording every intermediate state, `steps + 1` points in total.
pub fn weave_path<F>(
    z: &PhasePoint,
    h: f64,
    steps: usize,
    pre: &Preconditioner,
    grad: &mut F,
) -> Result<Vec<PhasePoint>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut path = Vec::with_capacity(steps + 1);
    path.push(z.clone());
    for _ in 0..steps {
        let next = weave_step(path.last().expect("non-empty"), h, pre, grad)?;
        path.push(next);
    }
    Ok(path)
}
