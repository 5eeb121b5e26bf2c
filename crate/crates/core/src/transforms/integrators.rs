use nalgebra::DVector;

use super::{bounce, circle, PhasePoint, Preconditioner};
use crate::error::{check_dim, Error, Result};

fn finite(v: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Leap-frog step: half kick, drift, half kick.
///
/// `grad_u` is the force field acting on `v`, `grad_k` the drift field acting
/// on `x`. Any `grad_k` that is odd in `v` keeps the step flip-reversible.
pub fn leapfrog_step<GU, GK>(
    z: &PhasePoint,
    h: f64,
    grad_u: &mut GU,
    grad_k: &mut GK,
) -> Result<PhasePoint>
where
    GU: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    GK: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    check_dim(z.x.len(), z.v.len())?;
    let v_half = &z.v - finite(grad_u(&z.x)?, "potential gradient")? * (0.5 * h);
    let x = &z.x + finite(grad_k(&v_half)?, "kinetic gradient")? * h;
    let v = v_half - finite(grad_u(&x)?, "potential gradient")? * (0.5 * h);
    Ok(PhasePoint { x, v })
}

/// Leap-frog step whose drift is the exact rotation about `M`.
///
/// `grad_u_gauss` is the gradient of the potential relative to the Gaussian
/// reference `N(M, Σ)`; the kicks are preconditioned, `v ← v − (h/2) Σ ∇U`.
pub fn infhmc_step<G>(z: &PhasePoint, h: f64, pre: &Preconditioner, grad_u_gauss: &mut G) -> Result<PhasePoint>
where
    G: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    check_dim(z.dim(), pre.dim())?;
    let kick = |x: &DVector<f64>, g: &mut G| -> Result<DVector<f64>> {
        let grad = finite(g(x)?, "potential gradient")?;
        Ok(pre.sigma() * grad * (0.5 * h))
    };
    let v_half = &z.v - kick(&z.x, grad_u_gauss)?;
    let rotated = circle(
        &PhasePoint {
            x: z.x.clone(),
            v: v_half,
        },
        h,
        pre.center(),
    )?;
    let v = &rotated.v - kick(&rotated.x, grad_u_gauss)?;
    Ok(PhasePoint { x: rotated.x, v })
}

/// Hug step: half drift, bounce at the midpoint, half drift.
///
/// The bounce is `R(x | 0, Σ)`, reflecting the velocity about the
/// hyperplane `Σ`-orthogonal to `grad_xi` at the midpoint.
pub fn hug_step<GK, GX>(
    z: &PhasePoint,
    h: f64,
    pre: &Preconditioner,
    grad_k: &mut GK,
    grad_xi: &mut GX,
) -> Result<PhasePoint>
where
    GK: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    GX: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    check_dim(z.dim(), pre.dim())?;
    let x_half = &z.x + finite(grad_k(&z.v)?, "kinetic gradient")? * (0.5 * h);
    let xi = finite(grad_xi(&x_half)?, "gradient")?;
    let origin = DVector::zeros(z.dim());
    let mid = PhasePoint {
        x: x_half,
        v: z.v.clone(),
    };
    let bounced = bounce(&mid, &xi, &origin, pre.sigma())?;
    let x = &bounced.x + finite(grad_k(&bounced.v)?, "kinetic gradient")? * (0.5 * h);
    Ok(PhasePoint { x, v: bounced.v })
}
