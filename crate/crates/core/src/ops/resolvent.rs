//! Closed-form resolvent φ_ε = A_ε⁻¹[ν₀ψ] of the free-transport operator
//! with the wall law folded into the boundary trace (d = 1).

use serde::{Deserialize, Serialize};

use super::{breaks, linear, OpContext, OP_TOL};
use crate::error::{FracError, Result};
use crate::quad::{integrate_pieces, integrate_power_tail, Tolerance};
use crate::testfn::{Profile, TestFunction};
use crate::Vec3;

/// Wall law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bc {
    Specular,
    Diffuse,
    /// Accommodation coefficient α ∈ [0, 1].
    Maxwell(f64),
}

impl Bc {
    pub fn alpha(self) -> f64 {
        match self {
            Bc::Specular => 0.0,
            Bc::Diffuse => 1.0,
            Bc::Maxwell(a) => a,
        }
    }

    pub fn from_alpha(alpha: f64) -> Bc {
        if alpha == 0.0 {
            Bc::Specular
        } else if alpha == 1.0 {
            Bc::Diffuse
        } else {
            Bc::Maxwell(alpha)
        }
    }
}

/// `∫₀^Y c e^{−cy} q(x₀ + σy) dy` for direction σ = ±1, with Y possibly ∞.
fn exp_average(psi: &TestFunction, x0: f64, sigma: f64, c: f64, y_max: f64) -> Result<f64> {
    let cut = (40.0 / c).min(y_max).min(x0.max(0.0) + psi.support_radius + 1.0);
    if cut <= 0.0 {
        return Ok(0.0);
    }
    let mut extra: Vec<f64> = [0.1, 1.0, 5.0].iter().map(|k| k / c).collect();
    for f in psi.profile.features() {
        extra.push(sigma * (f - x0));
    }
    extra.push(sigma * -x0);
    let f = |y: f64| c * (-c * y).exp() * psi.q(x0 + sigma * y);
    Ok(integrate_pieces(f, &breaks(0.0, cut, extra), OP_TOL)?.value)
}

/// Specular continuation from the wall with speed |v|: φ(0, |v|).
fn from_wall(psi: &TestFunction, c: f64) -> Result<f64> {
    exp_average(psi, 0.0, 1.0, c, f64::INFINITY)
}

/// Diffuse wall value c₀∫_{w>0} φ(0,w)F(w)w dw, reduced to a single
/// integral against F₀: q(0) + c₀[∫₀^Z (q(εu) − q(0))uF₀(u) du − q(0)M₀(Z)].
pub fn diffuse_wall_value(psi: &TestFunction, ctx: &OpContext, eps: f64) -> Result<f64> {
    let c0 = ctx.eq.c0()?;
    let t = ctx.table()?;
    linear(psi, &|c| Ok(c), &|p| {
        let q0 = p.q(0.0);
        let z = p.support_radius / eps;
        let mut extra: Vec<f64> = vec![1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0];
        extra.extend(p.profile.features().iter().map(|f| f / eps));
        let f = |u: f64| (p.q(eps * u) - q0) * u * t.f0(u);
        let body = integrate_pieces(f, &breaks(0.0, z, extra), OP_TOL)?.value;
        let tail = t.f0_flux_tail(z).expect("c0 exists so s > 1/2");
        Ok(q0 + c0 * (body - q0 * tail))
    })
}

/// φ_ε(x, v) for the wall law `bc`. Points on the wall are allowed.
pub fn resolvent_phi_eps(psi: &TestFunction, x: &Vec3, v: &Vec3, ctx: &OpContext, eps: f64, bc: Bc) -> Result<f64> {
    ctx.require_1d("the resolvent")?;
    let xd = x[0];
    let vd = v[0];
    if !(xd >= 0.0 && eps > 0.0 && vd.is_finite()) {
        return Err(FracError::InvalidParams(format!("resolvent needs x ≥ 0, eps > 0; got x = {xd}, eps = {eps}")));
    }
    let alpha = bc.alpha();
    let wall = if alpha > 0.0 && vd < 0.0 { Some(diffuse_wall_value(psi, ctx, eps)?) } else { None };
    phi_with_wall(psi, xd, vd, ctx.eq.params.nu0, eps, alpha, wall)
}

/// As [`resolvent_phi_eps`] with a precomputed diffuse wall value.
pub(crate) fn phi_with_wall(
    psi: &TestFunction,
    xd: f64,
    vd: f64,
    nu0: f64,
    eps: f64,
    alpha: f64,
    wall: Option<f64>,
) -> Result<f64> {
    if vd == 0.0 {
        return Ok(psi.q(xd));
    }
    if let Profile::Const(k) = psi.profile {
        return Ok(k);
    }
    let c = nu0 / (eps * vd.abs());
    let id = |k: f64| Ok(k);
    if vd > 0.0 {
        return linear(psi, &id, &|p| exp_average(p, xd, 1.0, c, f64::INFINITY));
    }
    // v < 0: free flight up to the wall at τ_f = x/(ε|v|), then the wall law
    let decay = (-c * xd).exp();
    let inner = linear(psi, &|k| Ok(k * (1.0 - decay)), &|p| exp_average(p, xd, -1.0, c, xd))?;
    if decay == 0.0 {
        return Ok(inner);
    }
    let mut w = 0.0;
    if alpha < 1.0 {
        w += (1.0 - alpha) * linear(psi, &id, &|p| from_wall(p, c))?;
    }
    if alpha > 0.0 {
        let b = wall.ok_or_else(|| FracError::InvalidParams("diffuse wall value required".into()))?;
        w += alpha * b;
    }
    Ok(inner + decay * w)
}

/// B*_D[γ₋φ_ε] on the wall by nested quadrature: an outer integral over
/// incoming speeds against c₀F(w)w, each φ_ε(0, w) from [`resolvent_phi_eps`].
/// Independent of [`diffuse_wall_value`], which goes through F₀.
pub fn diffuse_wall_value_nested(psi: &TestFunction, ctx: &OpContext, eps: f64) -> Result<f64> {
    let c0 = ctx.eq.c0()?;
    let q0 = psi.q(0.0);
    let nu0 = ctx.eq.params.nu0;
    let mut err = None;
    let f = |w: f64| match phi_with_wall(psi, 0.0, w, nu0, eps, 0.0, None) {
        Ok(phi) => ctx.eq.radial_pdf(w) * w * (phi - q0),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let r_max = 1e6 * (1.0 + psi.support_radius / eps);
    let body = integrate_power_tail(f, 1e-10, r_max, 2.0 * ctx.s() - 1.0, Tolerance::new(1e-15, 1e-11))?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(q0 + c0 * body.value)
}
