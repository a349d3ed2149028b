//! Heavy-tailed radial equilibrium, its samplers and the named constants.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{FracError, Result};
use crate::params::ModelParams;
use crate::quad::{integrate, integrate_power_tail, Tolerance};
use crate::rng::RandomStream;
use crate::Vec3;

const TABLE_NODES: usize = 4096;
const TABLE_DECADES: f64 = 12.0;

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0),
    }
}

/// Volume of the unit ball in ℝ^k (k = 0 gives 1).
pub fn ball_volume(k: usize) -> f64 {
    PI.powf(k as f64 / 2.0) / gamma(k as f64 / 2.0 + 1.0)
}

/// An unnormalised radial profile `r ↦ f(r)` with `f(r) r^a → tail_constant`.
pub trait RadialProfile: Debug + Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn tail_constant(&self) -> f64;
    /// Natural length scale; quadrature breakpoints are placed around it.
    fn scale(&self) -> f64 {
        1.0
    }
    /// `value(r) - tail_constant·r^{-a}`. Override when a cancellation-free
    /// form is available.
    fn gap(&self, r: f64, a: f64) -> f64 {
        self.value(r) - self.tail_constant() * r.powf(-a)
    }
}

/// `1 / (1 + (r/λ)^a)`.
#[derive(Clone, Debug)]
pub struct PowerLawProfile {
    pub exponent: f64,
    pub lambda: f64,
}

impl RadialProfile for PowerLawProfile {
    fn value(&self, r: f64) -> f64 {
        1.0 / (1.0 + (r / self.lambda).powf(self.exponent))
    }
    fn tail_constant(&self) -> f64 {
        self.lambda.powf(self.exponent)
    }
    fn scale(&self) -> f64 {
        self.lambda
    }
    fn gap(&self, r: f64, _a: f64) -> f64 {
        let q = (r / self.lambda).powf(self.exponent);
        -1.0 / (q * (1.0 + q))
    }
}

/// Inverse-transform table for a radial density `p(r)` behaving like `r^m`
/// at the origin and like `r^{-1-q}` at infinity.
#[derive(Clone, Debug)]
pub struct RadialTable {
    r: Vec<f64>,
    cdf: Vec<f64>,
    small_power: f64,
    tail_power: f64,
    total: f64,
}

impl RadialTable {
    fn build<P: Fn(f64) -> f64>(p: P, scale: f64, small_power: f64, tail_power: f64) -> Result<Self> {
        let tol = Tolerance::new(0.0, 1e-12);
        let r: Vec<f64> = (0..=TABLE_NODES)
            .map(|k| scale * 10f64.powf(-TABLE_DECADES / 2.0 + TABLE_DECADES * k as f64 / TABLE_NODES as f64))
            .collect();
        let mut cdf = Vec::with_capacity(r.len());
        let head = integrate(&p, 0.0, r[0], tol)?.value;
        cdf.push(head);
        for k in 1..r.len() {
            let inc = integrate(&p, r[k - 1], r[k], tol)?.value;
            cdf.push(cdf[k - 1] + inc);
        }
        let last = *r.last().unwrap();
        let tail = integrate_power_tail(&p, last, 10.0 * last, tail_power, tol)?.value;
        let total = cdf.last().unwrap() + tail;
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(RadialTable {
            r,
            cdf,
            small_power,
            tail_power,
            total,
        })
    }

    /// Integral of the unnormalised density over (0, ∞).
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Cumulative distribution at radius `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = self.r.len();
        if x <= self.r[0] {
            return self.cdf[0] * (x / self.r[0]).powf(self.small_power + 1.0);
        }
        if x >= self.r[n - 1] {
            let surv = 1.0 - self.cdf[n - 1];
            return 1.0 - surv * (self.r[n - 1] / x).powf(self.tail_power);
        }
        let k = self.r.partition_point(|&ri| ri <= x) - 1;
        let t = (x / self.r[k]).ln() / (self.r[k + 1] / self.r[k]).ln();
        self.cdf[k] + t * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Radius with the given cumulative probability.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        if u <= self.cdf[0] {
            return self.r[0] * (u / self.cdf[0]).powf(1.0 / (self.small_power + 1.0));
        }
        if u >= self.cdf[n - 1] {
            let surv = 1.0 - self.cdf[n - 1];
            let rest = (1.0 - u).max(f64::MIN_POSITIVE);
            return self.r[n - 1] * (surv / rest).powf(1.0 / self.tail_power);
        }
        let k = self.cdf.partition_point(|&c| c <= u) - 1;
        let span = self.cdf[k + 1] - self.cdf[k];
        let t = if span > 0.0 { (u - self.cdf[k]) / span } else { 0.0 };
        self.r[k] * (self.r[k + 1] / self.r[k]).powf(t)
    }
}

/// Named constants derived from the equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Constants {
    pub gamma: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub c_ds: f64,
    pub gamma_ds: f64,
}

/// Normalisation constant of the fractional Laplacian with symbol |ξ|^{2s}.
pub fn c_ds(d: usize, s: f64) -> f64 {
    let abs_gamma_neg_s = gamma(1.0 - s) / s;
    4f64.powf(s) * gamma(d as f64 / 2.0 + s) / (PI.powf(d as f64 / 2.0) * abs_gamma_neg_s)
}

/// The equilibrium velocity law F together with its sampling tables.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    pub params: ModelParams,
    pub profile: Arc<dyn RadialProfile>,
    /// Multiplier turning the profile into a probability density.
    pub normalization: f64,
    /// Tail constant γ of F.
    pub gamma_const: f64,
    pub radial_cdf_table: RadialTable,
    flux_table: Option<RadialTable>,
    c0: Option<f64>,
    /// Measured sup over |v| ∈ [1, 10³] of |F − γ|v|^{-d-2s}|·|v|^{d+4s}.
    pub tail_gap_constant: f64,
}

/// Default family `F(v) = C / (1 + |v/λ|^{d+2s})`, with λ = 1 unless a
/// tail constant is requested in `params.gamma`.
pub fn make_default_equilibrium(params: ModelParams) -> Result<Equilibrium> {
    params.validate()?;
    let a = params.tail_exponent();
    let d = params.d as f64;
    let c1 = a * (PI * d / a).sin() / (PI * sphere_area(params.d));
    let lambda = match params.gamma {
        None => 1.0,
        Some(g) => (g / c1).powf(1.0 / (2.0 * params.s)),
    };
    Equilibrium::from_profile(params, Arc::new(PowerLawProfile { exponent: a, lambda }))
}

impl Equilibrium {
    /// Builds an equilibrium from a user profile, normalising it and checking
    /// the tail-gap bound numerically.
    pub fn from_profile(params: ModelParams, profile: Arc<dyn RadialProfile>) -> Result<Self> {
        params.validate()?;
        let d = params.d;
        let s = params.s;
        let a = params.tail_exponent();
        let scale = profile.scale();
        for k in 0..=60 {
            let r = scale * 10f64.powf(-6.0 + 0.2 * k as f64);
            let v = profile.value(r);
            if !(v.is_finite() && v >= 0.0) {
                return Err(FracError::InvalidParams(format!(
                    "radial profile must be finite and nonnegative, got {v} at r={r}"
                )));
            }
        }
        let p = profile.clone();
        let radial = RadialTable::build(
            move |r: f64| r.powi(d as i32 - 1) * p.value(r),
            scale,
            d as f64 - 1.0,
            2.0 * s,
        )?;
        let normalization = 1.0 / (sphere_area(d) * radial.total());
        let gamma_const = normalization * profile.tail_constant();
        if let Some(g) = params.gamma {
            if ((gamma_const - g) / g).abs() > 1e-8 {
                return Err(FracError::InvalidParams(format!(
                    "profile tail constant {gamma_const} does not match requested gamma {g}"
                )));
            }
        }
        let mut sup: f64 = 0.0;
        let mut sup_low: f64 = 0.0;
        for k in 0..=60 {
            let r = 10f64.powf(0.05 * k as f64);
            let g = (normalization * profile.gap(r, a)).abs() * r.powf(d as f64 + 4.0 * s);
            if !g.is_finite() {
                return Err(FracError::InvalidParams(format!("tail gap not finite at r={r}")));
            }
            if k <= 40 {
                sup_low = sup_low.max(g);
            }
            sup = sup.max(g);
        }
        // a profile violating the gap bound shows up as growth in the last decade
        if sup > 2.0 * sup_low.max(1e-300) && sup > 1e-12 {
            return Err(FracError::InvalidParams(format!(
                "tail gap bound |F - γ|v|^-(d+2s)| <= C|v|^-(d+4s) violated (sup grows from {sup_low:e} to {sup:e})"
            )));
        }
        let (flux_table, c0) = if s > 0.5 {
            let p = profile.clone();
            let t = RadialTable::build(move |r: f64| r.powi(d as i32) * p.value(r), scale, d as f64, 2.0 * s - 1.0)?;
            let c0 = 1.0 / (ball_volume(d - 1) * normalization * t.total());
            (Some(t), Some(c0))
        } else {
            (None, None)
        };
        Ok(Equilibrium {
            params,
            profile,
            normalization,
            gamma_const,
            radial_cdf_table: radial,
            flux_table,
            c0,
            tail_gap_constant: sup,
        })
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    /// Radial density value F(r).
    pub fn radial_pdf(&self, r: f64) -> f64 {
        self.normalization * self.profile.value(r)
    }

    pub fn pdf(&self, v: &Vec3) -> f64 {
        self.radial_pdf(norm(v, self.d()))
    }

    /// F(r) − γ r^{-d-2s}, evaluated without cancellation when possible.
    pub fn radial_gap(&self, r: f64) -> f64 {
        self.normalization * self.profile.gap(r, self.params.tail_exponent())
    }

    /// P(|v| ≤ r) under F.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        self.radial_cdf_table.cdf(r)
    }

    pub fn constants(&self) -> Constants {
        constants(&self.params, self)
    }

    /// Draws v ~ F: inverse-transform radius, uniform direction.
    pub fn sample_velocity(&self, rng: &mut RandomStream) -> Vec3 {
        let r = self.radial_cdf_table.quantile(rng.uniform());
        let dir = random_direction(self.d(), rng);
        [r * dir[0], r * dir[1], r * dir[2]]
    }

    /// Draws w with density c₀F(w)|w·n| on {w·n < 0}. The radius comes from
    /// the inverse transform of r^d F(r), the direction from the cosine law
    /// about −n; this is exact, so no rejection envelope is needed.
    pub fn sample_diffuse_velocity(&self, n: &Vec3, rng: &mut RandomStream) -> Result<Vec3> {
        let table = self.flux_table.as_ref().ok_or_else(|| {
            FracError::InvalidParams(format!("diffuse sampling needs s > 1/2, got s={}", self.params.s))
        })?;
        let r = table.quantile(rng.uniform());
        let d = self.d();
        let inward = [-n[0], -n[1], -n[2]];
        Ok(match d {
            1 => [r * inward[0], 0.0, 0.0],
            2 => {
                let theta = (2.0 * rng.uniform() - 1.0).asin();
                let t = [-inward[1], inward[0], 0.0];
                let (sn, cs) = theta.sin_cos();
                [r * (cs * inward[0] + sn * t[0]), r * (cs * inward[1] + sn * t[1]), 0.0]
            }
            _ => {
                let ct = rng.uniform().sqrt();
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                let phi = std::f64::consts::TAU * rng.uniform();
                let (t1, t2) = orthonormal_pair(&inward);
                let mut w = [0.0; 3];
                for i in 0..3 {
                    w[i] = r * (ct * inward[i] + st * (phi.cos() * t1[i] + phi.sin() * t2[i]));
                }
                w
            }
        })
    }

    /// Wall flux normalisation c₀; errors when s ≤ 1/2.
    pub fn c0(&self) -> Result<f64> {
        self.c0.ok_or_else(|| {
            FracError::InvalidParams(format!(
                "c0 diverges: the flux moment of F is infinite for s={} <= 1/2",
                self.params.s
            ))
        })
    }

    /// Radial law of the flux density r^d F(r), normalised (s > 1/2 only).
    pub fn flux_table(&self) -> Option<&RadialTable> {
        self.flux_table.as_ref()
    }
}

/// c₀ = (∫_{w·n<0} F(w)|w·n| dw)^{-1}; independent of the unit normal.
pub fn compute_c0(eq: &Equilibrium, n: &Vec3) -> Result<f64> {
    let len = norm(n, eq.d());
    if (len - 1.0).abs() > 1e-12 {
        return Err(FracError::InvalidParams(format!("normal must be unit length, got |n|={len}")));
    }
    eq.c0()
}

/// γ₀, γ₁, c_{d,s} and γ_{d,s} for the given parameters and equilibrium.
pub fn constants(params: &ModelParams, eq: &Equilibrium) -> Constants {
    let s = params.s;
    let g = eq.gamma_const;
    let scale = g * params.nu0.powf(1.0 - 2.0 * s);
    let gamma0 = scale * gamma(2.0 * s);
    let gamma1 = scale * gamma(2.0 * s + 1.0);
    let c = c_ds(params.d, s);
    Constants {
        gamma: g,
        gamma0,
        gamma1,
        c_ds: c,
        gamma_ds: gamma1 / c,
    }
}

pub(crate) fn norm(v: &Vec3, d: usize) -> f64 {
    v[..d].iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_direction(d: usize, rng: &mut RandomStream) -> Vec3 {
    match d {
        1 => {
            if rng.next_u64() >> 63 == 0 {
                [1.0, 0.0, 0.0]
            } else {
                [-1.0, 0.0, 0.0]
            }
        }
        2 => {
            let (s, c) = (std::f64::consts::TAU * rng.uniform()).sin_cos();
            [c, s, 0.0]
        }
        _ => {
            let z = 2.0 * rng.uniform() - 1.0;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (std::f64::consts::TAU * rng.uniform()).sin_cos();
            [rho * c, rho * s, z]
        }
    }
}

fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let a = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = a[0] * n[0] + a[1] * n[1] + a[2] * n[2];
    let mut t1 = [a[0] - dot * n[0], a[1] - dot * n[1], a[2] - dot * n[2]];
    let l = (t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]).sqrt();
    t1.iter_mut().for_each(|x| *x /= l);
    let t2 = [
        n[1] * t1[2] - n[2] * t1[1],
        n[2] * t1[0] - n[0] * t1[2],
        n[0] * t1[1] - n[1] * t1[0],
    ];
    (t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eq1(s: f64) -> Equilibrium {
        make_default_equilibrium(ModelParams { s, ..Default::default() }).unwrap()
    }

    // 1/(2∫₀^∞ dv/(1+v^{2.5})), mpmath quadrature at 30 digits.
    const C_NORM_1D_S075: f64 = 0.378_413_364_320_328_5;

    #[test]
    fn default_normalisation_d1() {
        let e = eq1(0.75);
        let exact = 1.0 / (2.0 * (PI / 2.5) / (PI / 2.5).sin());
        assert_relative_eq!(exact, C_NORM_1D_S075, max_relative = 1e-14);
        assert_relative_eq!(e.normalization, exact, max_relative = 1e-9);
        assert_relative_eq!(e.radial_pdf(0.0), e.normalization, epsilon = 0.0);
        assert_eq!(e.gamma_const, e.normalization);
    }

    #[test]
    fn normalisation_all_dims() {
        for d in 1..=3 {
            for &s in &[0.3, 0.6, 0.9] {
                let p = ModelParams { d, s, ..Default::default() };
                let e = make_default_equilibrium(p).unwrap();
                let a = d as f64 + 2.0 * s;
                let exact = a * (PI * d as f64 / a).sin() / (PI * sphere_area(d));
                assert_relative_eq!(e.normalization, exact, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn tail_ratio_at_ten() {
        let e = eq1(0.75);
        let r: f64 = 10.0;
        let ratio = e.radial_pdf(r) * r.powf(2.5) / e.gamma_const;
        // 1/(1+r^-2.5) - 1 = -r^-2.5/(1+r^-2.5)
        assert!((ratio - 1.0).abs() <= 10f64.powf(-2.5));
        assert_relative_eq!(ratio - 1.0, -1.0 / (1.0 + r.powf(2.5)), max_relative = 1e-10);
    }

    #[test]
    fn requested_gamma_is_honoured() {
        let p = ModelParams { gamma: Some(2.0), ..Default::default() };
        let e = make_default_equilibrium(p).unwrap();
        assert_relative_eq!(e.gamma_const, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn gamma1_values() {
        let e = make_default_equilibrium(ModelParams { s: 0.5, gamma: Some(1.0), ..Default::default() }).unwrap();
        assert_relative_eq!(e.constants().gamma1, 1.0, max_relative = 1e-8);
        let e = make_default_equilibrium(ModelParams { s: 0.75, gamma: Some(1.0), ..Default::default() }).unwrap();
        let k = e.constants();
        assert_relative_eq!(k.gamma1, 3.0 * PI.sqrt() / 4.0, max_relative = 1e-8);
        assert_relative_eq!(k.gamma1 / k.gamma0, 1.5, max_relative = 1e-14);
    }

    #[test]
    fn c_ds_matches_cosine_integral() {
        // 1/(2∫₀^∞ (1 - cos w) w^{-1-2s} dw) by mpmath, oscillatory part via quadosc
        let oracle = [(0.3, 0.230_096_381_681_632_1), (0.6, 0.333_549_429_912_274_5), (0.75, 0.299_206_712_291_606_8)];
        for (s, c) in oracle {
            assert_relative_eq!(c_ds(1, s), c, max_relative = 1e-7);
        }
    }

    #[test]
    fn c0_default_d1() {
        let e = eq1(0.75);
        // ∫₀^∞ v/(1+v^{2.5}) dv = (π/2.5)/sin(2π/2.5)
        let flux = e.normalization * (PI / 2.5) / (2.0 * PI / 2.5).sin();
        let c0 = compute_c0(&e, &[-1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(c0, 1.0 / flux, max_relative = 1e-9);
        assert!(compute_c0(&eq1(0.4), &[-1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn diffuse_requires_s_above_half() {
        let e = eq1(0.4);
        let mut rng = RandomStream::new(1, 0);
        assert!(e.sample_diffuse_velocity(&[-1.0, 0.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let e = eq1(0.6);
        for &u in &[1e-9, 1e-4, 0.1, 0.5, 0.9, 0.999, 1.0 - 1e-10] {
            let r = e.radial_cdf_table.quantile(u);
            assert_relative_eq!(e.radial_cdf(r), u, max_relative = 1e-8);
        }
    }

    #[test]
    fn rejects_bad_profile() {
        #[derive(Debug)]
        struct Slow;
        impl RadialProfile for Slow {
            fn value(&self, r: f64) -> f64 {
                // gap decays only like r^{-a-0.1}
                1.0 / (1.0 + r.powf(2.5)) + 1.0 / (1.0 + r.powf(2.6))
            }
            fn tail_constant(&self) -> f64 {
                1.0
            }
        }
        let p = ModelParams::default();
        assert!(Equilibrium::from_profile(p, Arc::new(Slow)).is_err());
    }
}
