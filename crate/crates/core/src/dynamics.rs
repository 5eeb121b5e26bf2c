//! Small-step behaviour of the weave transform with `M = 0`, `Σ = I`.
//!
//! Here `ξ = ∇U_leb`, `ξ̄ = ξ/|ξ|`, `P(x) = I − ξ̄ξ̄ᵀ` and `Q(x) = ξ̄ξ̄ᵀ`. As
//! `h → 0`, the projected weave iterates `p(z) = (x, P(x)v)` follow the
//! level-set ODE
//!
//! ```text
//! x′ = 2w
//! w′ = −2P(x)x − 2(r² − |w|² − |x|²) P H ξ̄ / |ξ| − 2 ∂ξ̄[w, w] ξ̄
//! ```
//!
//! where `H` is the Hessian of `U`, `∂ξ̄[u, v] = (Pu)ᵀ H v / |ξ|` and `r` is
//! the phase-space radius of the generating trajectory. Along the ODE both
//! `U(x)` and `ξ̄ᵀw` are constant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::targets::{finite_difference_hess_vec, TargetModel};
use crate::transforms::{weave_step, PhasePoint, Preconditioner};

/// Integration and projection abort when `|ξ(x)|` falls below this.
pub const GRADIENT_GUARD: f64 = 1e-8;

/// How Hessian-vector products were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianSource {
    Analytic,
    /// Central differences of the gradient, step `1e-5 · (1 + |x|)`.
    FiniteDifference,
}

/// A point of the level-set ODE: position, tangential velocity and the
/// conserved radius.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetState {
    pub x: DVector<f64>,
    pub w: DVector<f64>,
    pub r: f64,
}

impl LevelSetState {
    /// The projection `p(z)` of a phase point, carrying `r = |z|`.
    pub fn from_phase_point<M: TargetModel + ?Sized>(model: &M, z: &PhasePoint) -> Result<Self> {
        Ok(Self {
            w: project_p(model, &z.x, &z.v)?,
            x: z.x.clone(),
            r: z.norm(),
        })
    }

    fn distance(&self, other: &LevelSetState) -> f64 {
        ((&self.x - &other.x).norm_squared() + (&self.w - &other.w).norm_squared()).sqrt()
    }
}

/// Output of [`integrate_limit`].
#[derive(Clone, Debug)]
pub struct OdeRunReport {
    /// States at `t = k·dt`, `k = 0, …, n`.
    pub trajectory: Vec<LevelSetState>,
    pub dt: f64,
    /// `max_t |U(x(t)) − U(x(0))|`.
    pub potential_drift: f64,
    /// `max_t |ξ̄(x(t))ᵀ w(t)|`.
    pub tangency_drift: f64,
    pub hessian: HessianSource,
}

fn xi<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let g = model.grad_potential(x)?;
    let n = g.norm();
    if !n.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    if n < GRADIENT_GUARD {
        return Err(Error::ZeroGradient { norm: n });
    }
    Ok((g, n))
}

/// Unit normal `ξ(x)/|ξ(x)|` of the level set through `x`.
pub fn xi_bar<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (g, n) = xi(model, x)?;
    Ok(g / n)
}

/// Tangential part `P(x)v`.
pub fn project_p<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(x.len(), v.len())?;
    let n = xi_bar(model, x)?;
    Ok(v - &n * n.dot(v))
}

/// Normal part `Q(x)v`.
pub fn project_q<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(x.len(), v.len())?;
    let n = xi_bar(model, x)?;
    Ok(&n * n.dot(v))
}

/// Hessian of `U` applied to `u`, and where it came from.
pub fn hessian_action<M: TargetModel + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, HessianSource)> {
    match model.hess_vec(x, u) {
        Some(hv) => Ok((-hv?, HessianSource::Analytic)),
        None => Ok((-finite_difference_hess_vec(model, x, u)?, HessianSource::FiniteDifference)),
    }
}

/// `∂ξ̄(x)[u, v] = (P(x)u)ᵀ H(x) v / |ξ(x)|`.
pub fn dxi_bar<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    check_dim(x.len(), u.len())?;
    check_dim(x.len(), v.len())?;
    let (g, n) = xi(model, x)?;
    let nb = g / n;
    let pu = u - &nb * nb.dot(u);
    let (hv, _) = hessian_action(model, x, v)?;
    Ok(pu.dot(&hv) / n)
}

/// Pieces shared by the ODE right-hand side and the one-step expansion.
struct Geometry {
    nb: DVector<f64>,
    /// `P H ξ̄ / |ξ|`, the vector `∂ξ̄[·, ξ̄]`.
    curvature_normal: DVector<f64>,
    source: HessianSource,
    norm: f64,
}

fn geometry<M: TargetModel + ?Sized>(model: &M, x: &DVector<f64>) -> Result<Geometry> {
    let (g, norm) = xi(model, x)?;
    let nb = g / norm;
    let (h_nb, source) = hessian_action(model, x, &nb)?;
    let p_h_nb = &h_nb - &nb * nb.dot(&h_nb);
    Ok(Geometry {
        curvature_normal: p_h_nb / norm,
        nb,
        source,
        norm,
    })
}

impl Geometry {
    fn p(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.nb * self.nb.dot(v)
    }

    /// `∂ξ̄[w, w]` for tangential `w`.
    fn second_form<M: TargetModel + ?Sized>(&self, model: &M, x: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        let pw = self.p(w);
        let (hw, _) = hessian_action(model, x, w)?;
        Ok(pw.dot(&hw) / self.norm)
    }
}

/// `(x′, w′)` of the level-set ODE.
pub fn limit_rhs<M: TargetModel + ?Sized>(model: &M, zeta: &LevelSetState) -> Result<(DVector<f64>, DVector<f64>)> {
    check_dim(zeta.x.len(), zeta.w.len())?;
    let geo = geometry(model, &zeta.x)?;
    let excess = zeta.r * zeta.r - zeta.w.norm_squared() - zeta.x.norm_squared();
    let form = geo.second_form(model, &zeta.x, &zeta.w)?;
    let dw = geo.p(&zeta.x) * -2.0 - &geo.curvature_normal * (2.0 * excess) - &geo.nb * (2.0 * form);
    Ok((&zeta.w * 2.0, dw))
}

/// First-order coefficient `(ã + (0, b̃))(z)` of `p(φ_h(z)) − p(z)`.
///
/// `ã(x, v) = 2(Pv, −Px)` and `b̃(x, v) = −2(ξ̄ᵀv)² P H ξ̄/|ξ| − 2 ∂ξ̄[Pv, Pv] ξ̄`.
pub fn expansion_coefficient<M: TargetModel + ?Sized>(model: &M, z: &PhasePoint) -> Result<(DVector<f64>, DVector<f64>)> {
    let geo = geometry(model, &z.x)?;
    let pv = geo.p(&z.v);
    let normal = geo.nb.dot(&z.v);
    let form = geo.second_form(model, &z.x, &pv)?;
    let dw = geo.p(&z.x) * -2.0 - &geo.curvature_normal * (2.0 * normal * normal) - &geo.nb * (2.0 * form);
    Ok((pv * 2.0, dw))
}

/// `‖p(φ_h(z)) − p(z) − h(ã + (0, b̃))(z)‖`.
pub fn expansion_residual<M: TargetModel + ?Sized>(model: &M, z: &PhasePoint, h: f64) -> Result<f64> {
    if h == 0.0 {
        return Ok(0.0);
    }
    let next = step(model, z, h)?;
    let p0 = LevelSetState::from_phase_point(model, z)?;
    let p1 = LevelSetState::from_phase_point(model, &next)?;
    let (ax, aw) = expansion_coefficient(model, z)?;
    let rx = &p1.x - &p0.x - ax * h;
    let rw = &p1.w - &p0.w - aw * h;
    Ok((rx.norm_squared() + rw.norm_squared()).sqrt())
}

fn step<M: TargetModel + ?Sized>(model: &M, z: &PhasePoint, h: f64) -> Result<PhasePoint> {
    let pre = Preconditioner::identity(z.dim());
    weave_step(z, h, &pre, &mut |x: &DVector<f64>| model.grad_potential(x))
}

/// `|U(x′) − U(x)|` for `(x′, v′) = φ_h(x, v)`.
pub fn energy_drift<M: TargetModel + ?Sized>(model: &M, z: &PhasePoint, h: f64) -> Result<f64> {
    let next = step(model, z, h)?;
    Ok((model.potential(&next.x)? - model.potential(&z.x)?).abs())
}

/// Monte Carlo estimate of `C(r) = r sup|ξ| + r² sup‖∂ξ‖` over the ball of
/// radius `r`, using the origin and `samples` uniform points. `‖∂ξ‖` is the
/// spectral norm of the Hessian, assembled column by column.
pub fn energy_drift_constant<M: TargetModel + ?Sized>(model: &M, r: f64, samples: usize, seed: u64) -> Result<f64> {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup_grad: f64 = 0.0;
    let mut sup_hess: f64 = 0.0;
    for i in 0..=samples {
        let x = if i == 0 {
            DVector::zeros(d)
        } else {
            let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let radius = r * rng.random::<f64>().powf(1.0 / d as f64);
            dir.normalize() * radius
        };
        sup_grad = sup_grad.max(model.grad_potential(&x)?.norm());
        let mut hess = DMatrix::zeros(d, d);
        for j in 0..d {
            let (col, _) = hessian_action(model, &x, &DVector::from_fn(d, |k, _| f64::from(u8::from(k == j))))?;
            hess.set_column(j, &col);
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        sup_hess = sup_hess.max(hess.symmetric_eigenvalues().amax());
    }
    Ok(r * sup_grad + r * r * sup_hess)
}

/// Classical fourth-order Runge–Kutta with fixed step over `[0, t_end]`.
pub fn integrate_limit<M: TargetModel + ?Sized>(model: &M, zeta0: &LevelSetState, t_end: f64, dt: f64) -> Result<OdeRunReport> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::invalid("dt", "step and horizon must be positive"));
    }
    let n = (t_end / dt).round() as usize;
    let source = geometry(model, &zeta0.x)?.source;
    let u0 = model.potential(&zeta0.x)?;
    let mut report = OdeRunReport {
        trajectory: Vec::with_capacity(n + 1),
        dt,
        potential_drift: 0.0,
        tangency_drift: 0.0,
        hessian: source,
    };
    let shift = |s: &LevelSetState, k: &(DVector<f64>, DVector<f64>), c: f64| LevelSetState {
        x: &s.x + &k.0 * c,
        w: &s.w + &k.1 * c,
        r: s.r,
    };
    let mut zeta = zeta0.clone();
    for k in 0..=n {
        let nb = xi_bar(model, &zeta.x).map_err(|e| locate(e, k as f64 * dt))?;
        report.tangency_drift = report.tangency_drift.max(nb.dot(&zeta.w).abs());
        report.potential_drift = report.potential_drift.max((model.potential(&zeta.x)? - u0).abs());
        report.trajectory.push(zeta.clone());
        if k == n {
            break;
        }
        let rhs = |s: &LevelSetState| limit_rhs(model, s).map_err(|e| locate(e, k as f64 * dt));
        let k1 = rhs(&zeta)?;
        let k2 = rhs(&shift(&zeta, &k1, 0.5 * dt))?;
        let k3 = rhs(&shift(&zeta, &k2, 0.5 * dt))?;
        let k4 = rhs(&shift(&zeta, &k3, dt))?;
        zeta = LevelSetState {
            x: &zeta.x + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (dt / 6.0),
            w: &zeta.w + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (dt / 6.0),
            r: zeta.r,
        };
    }
    Ok(report)
}

fn locate(e: Error, t: f64) -> Error {
    match e {
        Error::ZeroGradient { norm } => Error::Config(format!("gradient vanished (|ξ| = {norm:e}) at t = {t}")),
        other => other,
    }
}

/// Projected weave iterates `p(φ_h^n(z0))`, `n = 0, …, steps`.
pub fn discrete_trajectory<M: TargetModel + ?Sized>(model: &M, z0: &PhasePoint, h: f64, steps: usize) -> Result<Vec<LevelSetState>> {
    let mut z = z0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(LevelSetState::from_phase_point(model, &z)?);
    for _ in 0..steps {
        z = step(model, &z, h)?;
        let mut p = LevelSetState::from_phase_point(model, &z)?;
        p.r = z0.norm();
        out.push(p);
    }
    Ok(out)
}

/// Result of comparing weave iterates with the level-set ODE.
#[derive(Clone, Debug)]
pub struct LimitComparison {
    pub h: f64,
    /// `max_k |p(φ_h^{⌊t_k/h⌋}(z0)) − ζ(t_k)|` over the ODE grid `t_k = k·dt`.
    pub sup_error: f64,
    pub ode: OdeRunReport,
}

/// Runs both the discrete iterates and the ODE from `p(z0)` up to `t_end`.
pub fn compare_limit<M: TargetModel + ?Sized>(model: &M, z0: &PhasePoint, h: f64, t_end: f64, dt: f64) -> Result<LimitComparison> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", "must be positive"));
    }
    let zeta0 = LevelSetState::from_phase_point(model, z0)?;
    let ode = integrate_limit(model, &zeta0, t_end, dt)?;
    let steps = (t_end / h + 1e-9).floor() as usize;
    let discrete = discrete_trajectory(model, z0, h, steps)?;
    let mut sup_error: f64 = 0.0;
    for (k, zeta) in ode.trajectory.iter().enumerate() {
        let n = ((k as f64 * dt) / h + 1e-9).floor() as usize;
        sup_error = sup_error.max(discrete[n.min(steps)].distance(zeta));
    }
    Ok(LimitComparison { h, sup_error, ode })
}
