//! Operators at kinetic scale ε, evaluated against the tabulated kernels.
//! All of them are one-dimensional.

use super::resolvent::Bc;
use super::{breaks, linear, zero, OpContext, OP_TOL};
use crate::error::{FracError, Result};
use crate::quad::{integrate_pieces, integrate_power_tail, Tolerance};
use crate::testfn::TestFunction;
use crate::Vec3;

fn check(ctx: &OpContext, x: &Vec3, eps: f64) -> Result<f64> {
    ctx.require_1d("the ε-scale operators")?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(FracError::InvalidParams(format!("eps must be positive, got {eps}")));
    }
    let xd = x[0];
    if xd > 0.0 && xd.is_finite() {
        Ok(xd)
    } else {
        Err(FracError::InvalidParams(format!("evaluation point must be interior, got x = {xd}")))
    }
}

/// Breakpoints at the kernel scale ε and at the test-function features.
fn eps_breaks(psi: &TestFunction, x: f64, eps: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut extra: Vec<f64> = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0].iter().map(|k| k * eps).collect();
    extra.push(x);
    for c in psi.profile.features() {
        extra.push((c - x).abs());
        extra.push(c + x);
    }
    breaks(lo, hi, extra)
}

/// `ε⁻¹∫₀^Z (ψₑ(x+z) + ψₑ(x−z) − 2ψ(x)) K(z/ε) dz − ψ(x)·T(Z/ε)`, the
/// bracket of the specular operator for a generic kernel `K` with two-sided
/// tail mass `T`.
pub fn sr_integral<K, T>(psi: &TestFunction, x: f64, eps: f64, kernel: K, tail: T) -> Result<f64>
where
    K: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let q0 = psi.q(x);
    let z_max = x + psi.support_radius;
    let f = |z: f64| (psi.q_ext(x + z) + psi.q_ext(x - z) - 2.0 * q0) * kernel(z / eps);
    let body = integrate_pieces(f, &eps_breaks(psi, x, eps, 0.0, z_max), OP_TOL)?.value;
    Ok(body / eps - q0 * tail(z_max / eps))
}

/// L^ε[ψ](x) = ε^{−2s}∫(ψ(η(x, εw)) − ψ(x))F₁(w) dw.
pub fn leps_sr(psi: &TestFunction, x: &Vec3, ctx: &OpContext, eps: f64) -> Result<f64> {
    let xd = check(ctx, x, eps)?;
    let t = ctx.table()?;
    let scale = eps.powf(-2.0 * ctx.s());
    linear(psi, &zero, &|p| Ok(scale * sr_integral(p, xd, eps, |u| t.f1(u), |w| t.f1_tail_mass(w))?))
}

/// L_ε[ψ](x): the jumps of L^ε that stay inside Ω.
pub fn leps_diffuse(psi: &TestFunction, x: &Vec3, ctx: &OpContext, eps: f64) -> Result<f64> {
    let xd = check(ctx, x, eps)?;
    let t = ctx.table()?;
    let scale = eps.powf(-2.0 * ctx.s());
    linear(psi, &zero, &|p| {
        let q0 = p.q(xd);
        let z_max = xd + p.support_radius;
        let pair = |z: f64| (p.q(xd + z) + p.q(xd - z) - 2.0 * q0) * t.f1(z / eps);
        let one = |z: f64| (p.q(xd + z) - q0) * t.f1(z / eps);
        let a = integrate_pieces(pair, &eps_breaks(p, xd, eps, 0.0, xd), OP_TOL)?.value;
        let b = integrate_pieces(one, &eps_breaks(p, xd, eps, xd, z_max), OP_TOL)?.value;
        Ok(scale * ((a + b) / eps - q0 * 0.5 * t.f1_tail_mass(z_max / eps)))
    })
}

/// κ_ε[ψ](x) = ε^{−2s}∫ν₀e^{−ν₀τ_f}(ψ(x_f) − ψ(x))F(v) dv, integrated
/// directly against F. In d = 1 only v < 0 exits, at x_f = 0 after
/// τ_f = x/(ε|v|).
pub fn kappa_eps(psi: &TestFunction, x: &Vec3, ctx: &OpContext, eps: f64) -> Result<f64> {
    let xd = check(ctx, x, eps)?;
    let diff = psi.q(0.0) - psi.q(xd);
    if diff == 0.0 {
        return Ok(0.0);
    }
    Ok(eps.powf(-2.0 * ctx.s()) * diff * exit_rate(ctx, xd / eps)?)
}

/// ν₀∫₀^∞ e^{−ν₀X/r} F(r) dr: rate of jumps longer than X to the left.
pub fn exit_rate(ctx: &OpContext, big_x: f64) -> Result<f64> {
    let nu = ctx.eq.params.nu0;
    let c = nu * big_x;
    let lo = c / 800.0;
    let hi = 1e8 * big_x.max(1.0);
    let f = |r: f64| (-c / r).exp() * ctx.eq.radial_pdf(r);
    let e = integrate_power_tail(f, lo, hi, 2.0 * ctx.s(), Tolerance::new(0.0, 1e-12))?;
    Ok(nu * e.value)
}

/// ε^{−2s}∫(ψ̃(x + εw) − ψ(x))F₁(w) dw with ψ̃ frozen at ψ(0) outside Ω;
/// equals L_ε + κ_ε.
pub fn leps_extended(psi: &TestFunction, x: &Vec3, ctx: &OpContext, eps: f64) -> Result<f64> {
    let xd = check(ctx, x, eps)?;
    let t = ctx.table()?;
    let scale = eps.powf(-2.0 * ctx.s());
    linear(psi, &zero, &|p| {
        let q0 = p.q(xd);
        let qw = p.q(0.0);
        let z_max = xd + p.support_radius;
        let g = |z: f64| {
            let left = if z < xd { p.q(xd - z) } else { qw };
            (p.q(xd + z) + left - 2.0 * q0) * t.f1(z / eps)
        };
        let body = integrate_pieces(g, &eps_breaks(p, xd, eps, 0.0, z_max), OP_TOL)?.value;
        Ok(scale * (body / eps + (qw - 2.0 * q0) * 0.5 * t.f1_tail_mass(z_max / eps)))
    })
}

/// 𝒟^{2s−1}_ε[ψ](y) = ε^{1−2s}c₀∫_{w·n<0}(ψ(y + εw) − ψ(y))F₀(w)|w·n| dw.
/// A scalar: the flux weight |w·n| is already folded in.
pub fn d2sm1_eps(psi: &TestFunction, y: &Vec3, ctx: &OpContext, eps: f64) -> Result<f64> {
    ctx.require_1d("the ε-scale nonlocal gradient")?;
    let yd = y[0];
    if !(yd >= 0.0 && eps > 0.0) {
        return Err(FracError::InvalidParams(format!("need y ≥ 0 and eps > 0, got y = {yd}, eps = {eps}")));
    }
    let c0 = ctx.eq.c0()?;
    let t = ctx.table()?;
    let scale = c0 * eps.powf(1.0 - 2.0 * ctx.s());
    linear(psi, &zero, &|p| {
        let q0 = p.q(yd);
        let z_max = yd + p.support_radius;
        let f = |z: f64| (p.q(yd + z) - q0) * t.f0(z / eps) * z;
        let body = integrate_pieces(f, &eps_breaks(p, yd, eps, 0.0, z_max), OP_TOL)?.value;
        let tail = t.f0_flux_tail(z_max / eps).expect("c0 exists so s > 1/2");
        Ok(scale * (body / (eps * eps) - q0 * tail))
    })
}

/// ε-level generator for the given wall law: L^ε for specular walls,
/// L_ε + κ_ε for diffuse ones, the convex combination for Maxwell walls.
pub fn op_leps(psi: &TestFunction, x: &Vec3, ctx: &OpContext, eps: f64, bc: Bc) -> Result<f64> {
    let alpha = bc.alpha();
    let mut acc = 0.0;
    if alpha < 1.0 {
        acc += (1.0 - alpha) * leps_sr(psi, x, ctx, eps)?;
    }
    if alpha > 0.0 {
        acc += alpha * (leps_diffuse(psi, x, ctx, eps)? + kappa_eps(psi, x, ctx, eps)?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::make_default_equilibrium;
    use crate::params::ModelParams;
    use crate::testfn::{ds_family, gaussian_bump};
    use approx::assert_relative_eq;
    use std::sync::{Arc, OnceLock};

    fn ctx() -> &'static OpContext {
        static C: OnceLock<OpContext> = OnceLock::new();
        C.get_or_init(|| {
            let eq = make_default_equilibrium(ModelParams::default()).unwrap();
            OpContext::with_table(&eq, Arc::new(crate::KernelTable::build(&eq).unwrap()))
        })
    }

    fn p(x: f64) -> Vec3 {
        [x, 0.0, 0.0]
    }

    #[test]
    fn constants_exactly_zero() {
        let c = ctx();
        let one = TestFunction::constant(2.5);
        for bc in [Bc::Specular, Bc::Diffuse, Bc::Maxwell(0.3)] {
            assert_eq!(op_leps(&one, &p(0.7), c, 0.1, bc).unwrap(), 0.0);
        }
        assert_eq!(kappa_eps(&one, &p(0.7), c, 0.1).unwrap(), 0.0);
        assert_eq!(leps_extended(&one, &p(0.7), c, 0.1).unwrap(), 0.0);
        assert_eq!(d2sm1_eps(&one, &p(0.0), c, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn exit_rate_matches_kernel_tail() {
        // ν₀∫e^{−ν₀X/r}F dr is the one-sided F₁ tail mass beyond X
        let c = ctx();
        let t = c.table().unwrap();
        for big_x in [0.05, 1.0, 7.0, 300.0] {
            assert_relative_eq!(exit_rate(c, big_x).unwrap(), 0.5 * t.f1_tail_mass(big_x), max_relative = 1e-8);
        }
    }

    #[test]
    fn extended_form_is_sum() {
        let c = ctx();
        let psi = gaussian_bump(2.0, 0.5);
        for (x, eps) in [(0.3, 0.1), (1.5, 0.05), (2.2, 0.2)] {
            let lhs = leps_diffuse(&psi, &p(x), c, eps).unwrap() + kappa_eps(&psi, &p(x), c, eps).unwrap();
            let rhs = leps_extended(&psi, &p(x), c, eps).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn specular_homogeneity() {
        let c = ctx();
        let t = c.table().unwrap();
        let s = c.s();
        let psi = ds_family()[0].clone();
        for (x, eps) in [(0.5, 0.1), (1.7, 0.2)] {
            let lhs = leps_sr(&psi, &p(x), c, 0.5 * eps).unwrap();
            let inner = sr_integral(&psi, x, eps, |u| t.f1(2.0 * u), |w| 0.5 * t.f1_tail_mass(2.0 * w)).unwrap();
            let rhs = (0.5 * eps).powf(-2.0 * s) * 2.0 * inner;
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn approaches_limit() {
        let c = ctx();
        let psi = ds_family()[0].clone();
        let x = p(1.2);
        let lim = super::super::op_lsr(&psi, &x, c).unwrap();
        let e1 = (leps_sr(&psi, &x, c, 0.1).unwrap() - lim).abs();
        let e2 = (leps_sr(&psi, &x, c, 0.025).unwrap() - lim).abs();
        // the rate is ε^{min(2−2s, 2s)} = ε^{1/2} here
        assert!(e2 < 0.6 * e1, "{e1} {e2}");
        let lim = super::super::op_kappa_surface(&psi, &x, c).unwrap();
        let k = kappa_eps(&psi, &x, c, 0.01).unwrap();
        assert_relative_eq!(k, lim, max_relative = 0.05);
    }

    #[test]
    fn rejects_higher_dimension() {
        let eq = make_default_equilibrium(ModelParams { d: 2, ..Default::default() }).unwrap();
        let c = OpContext::limit_only(&eq);
        let psi = gaussian_bump(1.0, 0.5);
        assert!(matches!(leps_sr(&psi, &[0.0, 1.0, 0.0], &c, 0.1), Err(FracError::Unsupported(_))));
    }
}
