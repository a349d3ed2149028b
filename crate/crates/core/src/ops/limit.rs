//! Limit operators: L_SR, the regional fractional Laplacian, κ, the
//! nonlocal gradient 𝒟^{2s−1} and their combinations L_D, L_M.

use std::f64::consts::PI;

use super::{breaks, linear, zero, OpContext, OP_TOL};
use crate::error::{FracError, Result};
use crate::quad::{integrate, integrate_pieces, integrate_power_tail, Tolerance};
use crate::testfn::{Profile, TestFunction};
use crate::Vec3;

/// Inner principal-value radius.
pub fn inner_cutoff(xd: f64) -> f64 {
    (1e-3 * (1.0 + xd)).min(0.5 * xd)
}

fn check_interior(ctx: &OpContext, x: &Vec3) -> Result<f64> {
    let xd = x[ctx.d() - 1];
    if xd > 0.0 && xd.is_finite() {
        Ok(xd)
    } else {
        Err(FracError::InvalidParams(format!("evaluation point must be interior, got x_d = {xd}")))
    }
}

/// Breakpoints in a jump variable `v ≥ 0` where ψ(x ± v) crosses features.
fn jump_breaks(psi: &TestFunction, x: f64) -> Vec<f64> {
    let mut b = vec![x];
    for c in psi.profile.features() {
        b.push((c - x).abs());
        b.push(c + x);
    }
    b
}

/// L_SR[ψ](x) = −γ₁ PV∫(ψ(x) − ψ(η(x,v)))|v|^{−d−2s} dv.
pub fn op_lsr(psi: &TestFunction, x: &Vec3, ctx: &OpContext) -> Result<f64> {
    op_lsr_with_cutoff(psi, x, ctx, None)
}

/// As [`op_lsr`] with an explicit inner radius.
pub fn op_lsr_with_cutoff(psi: &TestFunction, x: &Vec3, ctx: &OpContext, delta: Option<f64>) -> Result<f64> {
    let xd = check_interior(ctx, x)?;
    let delta = delta.unwrap_or_else(|| inner_cutoff(xd));
    let g1 = ctx.k.gamma1;
    let s = ctx.s();
    linear(psi, &zero, &|p| match ctx.d() {
        1 => Ok(g1 * lsr_1d(p, xd, s, delta)?),
        2 => Ok(g1 * lsr_2d(p, x, s, delta)?),
        d => Err(FracError::Unsupported(format!("L_SR in d = {d}"))),
    })
}

fn lsr_1d(psi: &TestFunction, x: f64, s: f64, delta: f64) -> Result<f64> {
    let q0 = psi.q(x);
    let q2 = psi.q_jet(x)[2];
    let inner = q2 * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let r = x + psi.support_radius;
    let f = |v: f64| (psi.q_ext(x + v) + psi.q_ext(x - v) - 2.0 * q0) * v.powf(-1.0 - 2.0 * s);
    let body = integrate_pieces(f, &breaks(delta, r, jump_breaks(psi, x)), OP_TOL)?.value;
    let tail = -2.0 * q0 * r.powf(-2.0 * s) / (2.0 * s);
    Ok(inner + body + tail)
}

/// Angular integral over a half circle of the paired second difference.
fn lsr_2d(psi: &TestFunction, x: &Vec3, s: f64, delta: f64) -> Result<f64> {
    let d = 2;
    let p0 = psi.value(x, d);
    let h = psi.hessian(x, d);
    let inner = 0.5 * PI * (h[0][0] + h[1][1]) * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let reach = psi.support_radius.max(3.0 * psi.tangential.unwrap_or(0.0) * 3.0);
    let r_max = x[1] + reach + x[0].abs();
    let tol = Tolerance::new(1e-13, 1e-9);
    let radial = |r: f64| {
        let ang = |t: f64| {
            let (sn, cs) = t.sin_cos();
            let a = [x[0] + r * cs, x[1] + r * sn, 0.0];
            let b = [x[0] - r * cs, x[1] - r * sn, 0.0];
            psi.value_ext(&a, d) + psi.value_ext(&b, d) - 2.0 * p0
        };
        integrate(ang, 0.0, PI, tol).map(|e| e.value).unwrap_or(f64::NAN) * r.powf(-1.0 - 2.0 * s)
    };
    let body = integrate_pieces(radial, &breaks(delta, r_max, [x[1], 1.0, 2.0 * x[1]]), tol)?.value;
    let tail = -2.0 * p0 * PI * r_max.powf(-2.0 * s) / (2.0 * s);
    Ok(inner + body + tail)
}

/// (−Δ)^s_Ω ψ(x) = c_{d,s} PV∫_Ω (ψ(x) − ψ(y))|x − y|^{−d−2s} dy.
pub fn op_regional(psi: &TestFunction, x: &Vec3, ctx: &OpContext) -> Result<f64> {
    op_regional_with_cutoff(psi, x, ctx, None)
}

pub fn op_regional_with_cutoff(psi: &TestFunction, x: &Vec3, ctx: &OpContext, delta: Option<f64>) -> Result<f64> {
    let xd = check_interior(ctx, x)?;
    let delta = delta.unwrap_or_else(|| inner_cutoff(xd));
    let c = ctx.k.c_ds;
    let s = ctx.s();
    linear(psi, &zero, &|p| match ctx.d() {
        1 => Ok(c * regional_1d(p, xd, s, delta)?),
        2 => Ok(c * regional_2d(p, x, s, delta)?),
        d => Err(FracError::Unsupported(format!("regional fractional Laplacian in d = {d}"))),
    })
}

fn regional_1d(psi: &TestFunction, x: f64, s: f64, delta: f64) -> Result<f64> {
    let q0 = psi.q(x);
    let q2 = psi.q_jet(x)[2];
    let inner = -q2 * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let sym = |w: f64| (2.0 * q0 - psi.q(x + w) - psi.q(x - w)) * w.powf(-1.0 - 2.0 * s);
    let pair = integrate_pieces(sym, &breaks(delta, x, jump_breaks(psi, x)), OP_TOL)?.value;
    let r = x + psi.support_radius;
    let one = |w: f64| (q0 - psi.q(x + w)) * w.powf(-1.0 - 2.0 * s);
    let far = integrate_pieces(one, &breaks(x, r, jump_breaks(psi, x)), OP_TOL)?.value;
    let tail = q0 * r.powf(-2.0 * s) / (2.0 * s);
    Ok(inner + pair + far + tail)
}

fn regional_2d(psi: &TestFunction, x: &Vec3, s: f64, delta: f64) -> Result<f64> {
    let d = 2;
    let p0 = psi.value(x, d);
    let h = psi.hessian(x, d);
    let xd = x[1];
    let inner = -0.5 * PI * (h[0][0] + h[1][1]) * delta.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let tol = Tolerance::new(1e-13, 1e-9);
    let at = |r: f64, t: f64| {
        let (sn, cs) = t.sin_cos();
        psi.value(&[x[0] + r * cs, xd + r * sn, 0.0], d)
    };
    // full circles inside Ω, paired
    let near = |r: f64| {
        let f = |t: f64| 2.0 * p0 - at(r, t) - at(r, t + PI);
        integrate(f, 0.0, PI, tol).map(|e| e.value).unwrap_or(f64::NAN) * r.powf(-1.0 - 2.0 * s)
    };
    let pair = integrate(near, delta, xd, tol)?.value;
    // beyond the wall distance, only the arc with x_d + r sinθ > 0
    let reach = psi.support_radius + x[0].abs() + 3.0 * psi.tangential.unwrap_or(0.0);
    let r_max = xd + reach;
    let far = |r: f64| {
        let t0 = (xd / r).min(1.0).asin();
        let f = |t: f64| p0 - at(r, t);
        let arc = integrate(f, -t0, PI + t0, tol).map(|e| e.value).unwrap_or(f64::NAN);
        arc * r.powf(-1.0 - 2.0 * s)
    };
    let outer = integrate_pieces(far, &breaks(xd, r_max, [2.0 * xd, 1.0 + xd]), tol)?.value;
    // remaining tail: p0 times the arc length, which tends to π
    let tail = integrate_power_tail(
        |r: f64| p0 * (PI + 2.0 * (xd / r).min(1.0).asin()) * r.powf(-1.0 - 2.0 * s),
        r_max,
        1e6 * r_max,
        2.0 * s,
        tol,
    )?
    .value;
    Ok(inner + pair + outer + tail)
}

/// κ[ψ](x) = PV∫_{x+v∉Ω} (ψ(x_f) − ψ(x)) γ₁|v|^{−d−2s} dv, integrated over
/// the exiting jumps.
pub fn op_kappa_volume(psi: &TestFunction, x: &Vec3, ctx: &OpContext) -> Result<f64> {
    let xd = check_interior(ctx, x)?;
    let s = ctx.s();
    let g1 = ctx.k.gamma1;
    let tol = Tolerance::new(0.0, 1e-11);
    match ctx.d() {
        1 => {
            let diff = psi.q(0.0) - psi.q(xd);
            if diff == 0.0 {
                return Ok(0.0);
            }
            let e = integrate_power_tail(|v: f64| diff * v.powf(-1.0 - 2.0 * s), xd, 1e4 * xd, 2.0 * s, tol)?;
            Ok(g1 * e.value)
        }
        2 => {
            let p0 = psi.value(x, 2);
            // directions with v₂ < 0; all radii past x_d/|sinθ| exit at the
            // same wall point
            let ang = |t: f64| {
                let (sn, cs) = t.sin_cos();
                let rmin = xd / -sn;
                let xf = [x[0] + rmin * cs, 0.0, 0.0];
                let diff = psi.value(&xf, 2) - p0;
                let radial = integrate_power_tail(|r: f64| r.powf(-1.0 - 2.0 * s), rmin, 1e4 * rmin, 2.0 * s, tol)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN);
                diff * radial
            };
            let e = integrate_pieces(ang, &[PI, 1.5 * PI, 2.0 * PI], Tolerance::new(1e-14, 1e-10))?;
            Ok(g1 * e.value)
        }
        d => Err(FracError::Unsupported(format!("κ in d = {d}"))),
    }
}

/// κ[ψ](x) = γ₀∫_{∂Ω} (ψ(y) − ψ(x)) (y − x)·n(y) |y − x|^{−d−2s} dσ(y).
/// In d = 1 this is γ₀(ψ(0) − ψ(x)) x^{−2s}.
pub fn op_kappa_surface(psi: &TestFunction, x: &Vec3, ctx: &OpContext) -> Result<f64> {
    let xd = check_interior(ctx, x)?;
    let s = ctx.s();
    let g0 = ctx.k.gamma0;
    match ctx.d() {
        1 => Ok(g0 * (psi.q(0.0) - psi.q(xd)) * xd.powf(-2.0 * s)),
        2 => {
            let p0 = psi.value(x, 2);
            // y = (x₁ + x_d tan θ, 0): dσ = x_d sec²θ dθ, |y − x| = x_d secθ
            let f = |t: f64| {
                let y = [x[0] + xd * t.tan(), 0.0, 0.0];
                (psi.value(&y, 2) - p0) * t.cos().powf(2.0 * s)
            };
            let h = 0.5 * PI;
            let e = integrate_pieces(f, &[-h, -0.25 * PI, 0.0, 0.25 * PI, h], Tolerance::new(1e-14, 1e-11))?;
            Ok(g0 * xd.powf(-2.0 * s) * e.value)
        }
        d => Err(FracError::Unsupported(format!("κ in d = {d}"))),
    }
}

/// Nonlocal gradient 𝒟^{2s−1}[ψ](y) (d = 1, s > 1/2), the flux whose
/// divergence is L_D:
/// γ₀ PV∫₀^∞ (ψ(z) − ψ(0)) sgn(z − y)|z − y|^{−2s} dz.
/// On the wall it reduces to γ₀∫_{w·n<0}(ψ(y+w) − ψ(y)) w|w|^{−1−2s} dw.
pub fn op_d2sm1(psi: &TestFunction, y: &Vec3, ctx: &OpContext) -> Result<Vec3> {
    ctx.require_1d("the nonlocal gradient")?;
    let s = ctx.s();
    if s <= 0.5 {
        return Err(FracError::InvalidParams(format!("the nonlocal gradient needs s > 1/2, got s = {s}")));
    }
    let yd = y[0];
    if !(yd >= 0.0) {
        return Err(FracError::InvalidParams(format!("point {yd} outside the closed half-space")));
    }
    let g0 = ctx.k.gamma0;
    let v = linear(psi, &zero, &|p| Ok(g0 * d2sm1_1d(p, yd, s)?))?;
    Ok([v, 0.0, 0.0])
}

fn d2sm1_1d(psi: &TestFunction, x: f64, s: f64) -> Result<f64> {
    let q0 = psi.q(x);
    let r = x + psi.support_radius;
    let p = 2.0 * s;
    let f = |w: f64| (psi.q(x + w) - q0) * w.abs().powf(-p) * w.signum();
    let right = integrate_pieces(f, &breaks(0.0, r, jump_breaks(psi, x)), OP_TOL)?.value;
    let tail = -q0 * r.powf(1.0 - p) / (p - 1.0);
    if x == 0.0 {
        return Ok(right + tail);
    }
    let left = integrate_pieces(f, &breaks(-x, 0.0, psi.profile.features().iter().map(|c| c - x)), OP_TOL)?.value;
    let wall = (q0 - psi.q(0.0)) * x.powf(1.0 - p) / (p - 1.0);
    Ok(left + right + tail + wall)
}

/// L_D[ψ] = −γ_{d,s}(−Δ)^s_Ω ψ + κ[ψ].
pub fn op_ld(psi: &TestFunction, x: &Vec3, ctx: &OpContext) -> Result<f64> {
    let reg = op_regional(psi, x, ctx)?;
    let kappa = op_kappa_surface(psi, x, ctx)?;
    Ok(-ctx.k.gamma_ds * reg + kappa)
}

/// L_M[ψ] = (1 − α)L_SR[ψ] + αL_D[ψ].
pub fn op_lm(psi: &TestFunction, x: &Vec3, ctx: &OpContext, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return op_lsr(psi, x, ctx);
    }
    if alpha == 1.0 {
        return op_ld(psi, x, ctx);
    }
    Ok((1.0 - alpha) * op_lsr(psi, x, ctx)? + alpha * op_ld(psi, x, ctx)?)
}

/// ψ + cχ with χ = e^{−x²/2} and c chosen so that 𝒟^{2s−1}[ψ + cχ]·n = 0
/// on the wall.
pub fn flux_corrected(psi: &TestFunction, ctx: &OpContext) -> Result<TestFunction> {
    let chi = TestFunction::new("chi", Profile::Gaussian { center: 0.0, sigma: 1.0 });
    let dp = op_d2sm1(psi, &[0.0; 3], ctx)?[0];
    let dc = op_d2sm1(&chi, &[0.0; 3], ctx)?[0];
    let c = -dp / dc;
    let mut out = psi.combine(1.0, &chi, c, &format!("{}+flux", psi.id));
    out.in_ds_class = psi.in_ds_class;
    out.dn_zero_order = psi.dn_zero_order;
    Ok(out)
}
