//! Exact solutions of ∂_t ρ = −γ_{d,s}(−Δ)^s ρ by a Fourier multiplier on
//! a wide periodic box. The specular half-line problem is the free one
//! applied to the even extension of the data.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::density::DensityField;
use crate::equilibrium::Equilibrium;
use crate::error::{FracError, Result};
use crate::kinetic::{GridSpec, InitialProfile};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierBox {
    /// Period; the box is [−width/2, width/2).
    pub width: f64,
    pub points: usize,
}

impl Default for FourierBox {
    fn default() -> Self {
        FourierBox {
            width: 200.0,
            points: 1 << 16,
        }
    }
}

/// Sampled solution on the periodic grid.
#[derive(Clone, Debug)]
pub struct PeriodicSolution {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl PeriodicSolution {
    /// Linear interpolation; zero outside the box.
    pub fn at(&self, x: f64) -> f64 {
        let p = (x - self.x0) / self.dx;
        let n = self.values.len();
        if p < 0.0 || p > (n - 1) as f64 {
            return 0.0;
        }
        let i = (p.floor() as usize).min(n - 2);
        let t = p - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }
}

/// Evolves `rho` on ℝ for time `t`. `extent` is the radius of the data's
/// support around the origin; the box must be at least eight times that
/// plus the diffusion length (γt)^{1/(2s)}.
pub fn evolve_periodic<F: Fn(f64) -> f64>(rho: F, extent: f64, t: f64, gamma: f64, s: f64, fbox: FourierBox) -> Result<PeriodicSolution> {
    if !(t >= 0.0 && gamma > 0.0 && s > 0.0 && s < 1.0) {
        return Err(FracError::InvalidParams(format!("need t ≥ 0, γ > 0, s ∈ (0,1); got t = {t}, γ = {gamma}, s = {s}")));
    }
    let reach = extent + (gamma * t).powf(1.0 / (2.0 * s));
    if fbox.width < 8.0 * reach {
        return Err(FracError::InvalidParams(format!(
            "Fourier box of width {} is too narrow for reach {reach:.3} (aliasing)",
            fbox.width
        )));
    }
    let n = fbox.points;
    let dx = fbox.width / n as f64;
    let x0 = -0.5 * fbox.width;
    let mut buf: Vec<Complex<f64>> = (0..n).map(|j| Complex::new(rho(x0 + j as f64 * dx), 0.0)).collect();
    if t > 0.0 {
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let xi = 2.0 * std::f64::consts::PI * kk / fbox.width;
            *c *= (-gamma * xi.abs().powf(2.0 * s) * t).exp();
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let inv = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= inv);
    }
    Ok(PeriodicSolution {
        x0,
        dx,
        values: buf.iter().map(|c| c.re).collect(),
    })
}

fn profile_extent(rho0: &InitialProfile) -> Result<f64> {
    match rho0 {
        InitialProfile::PointMass(_) => Err(FracError::Unsupported("the Fourier reference needs a density, not a point mass".into())),
        InitialProfile::Uniform { hi, .. } => Ok(*hi),
        InitialProfile::Gaussian { center, sigma } => Ok(center.abs() + 10.0 * sigma),
        InitialProfile::Tabulated(f) => Ok(f.hi.abs().max(f.lo.abs())),
    }
}

/// Specular limit density at time `t` on `grid` (bin averages), for data
/// given as a normalised density on x > 0.
pub fn reference_specular(rho0: &InitialProfile, t: f64, eq: &Equilibrium, grid: &GridSpec, fbox: FourierBox) -> Result<DensityField> {
    if eq.d() != 1 {
        return Err(FracError::Unsupported("the Fourier reference is one-dimensional".into()));
    }
    let extent = profile_extent(rho0)?;
    let k = eq.constants();
    let sol = evolve_periodic(|x| rho0.density(x.abs()), extent, t, k.gamma_ds, eq.params.s, fbox)?;
    if t == 0.0 {
        return Ok(DensityField::from_fn(|x| rho0.density(x), grid.lo, grid.hi, grid.bins, t));
    }
    Ok(DensityField::from_fn(|x| sol.at(x), grid.lo, grid.hi, grid.bins, t))
}

/// Free-space evolution of a density on ℝ, without any wall.
pub fn reference_free<F: Fn(f64) -> f64>(
    rho: F,
    extent: f64,
    t: f64,
    gamma: f64,
    s: f64,
    grid: &GridSpec,
    fbox: FourierBox,
) -> Result<DensityField> {
    let sol = evolve_periodic(rho, extent, t, gamma, s, fbox)?;
    Ok(DensityField::from_fn(|x| sol.at(x), grid.lo, grid.hi, grid.bins, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::make_default_equilibrium;
    use crate::params::ModelParams;

    fn eq() -> Equilibrium {
        make_default_equilibrium(ModelParams { s: 0.75, ..Default::default() }).unwrap()
    }

    #[test]
    fn initial_time_is_exact() {
        let p = InitialProfile::Gaussian { center: 2.0, sigma: 0.5 };
        let g = GridSpec { lo: 0.0, hi: 8.0, bins: 40 };
        let a = reference_specular(&p, 0.0, &eq(), &g, FourierBox::default()).unwrap();
        let b = DensityField::from_fn(|x| p.density(x), 0.0, 8.0, 40, 0.0);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn mass_is_conserved() {
        let p = InitialProfile::Gaussian { center: 2.0, sigma: 0.5 };
        let k = eq().constants();
        let m0 = evolve_periodic(|x| p.density(x.abs()), 7.0, 0.0, k.gamma_ds, 0.75, FourierBox::default()).unwrap().total_mass();
        for t in [0.1, 0.5, 2.0] {
            let m = evolve_periodic(|x| p.density(x.abs()), 7.0, t, k.gamma_ds, 0.75, FourierBox::default()).unwrap().total_mass();
            assert!((m - m0).abs() < 1e-8 * m0, "t = {t}");
        }
    }

    #[test]
    fn far_bump_ignores_wall() {
        let e = eq();
        let k = e.constants();
        let p = InitialProfile::Gaussian { center: 30.0, sigma: 0.5 };
        let fbox = FourierBox {
            width: 400.0,
            points: 1 << 17,
        };
        let g = GridSpec { lo: 26.0, hi: 34.0, bins: 80 };
        let spec = reference_specular(&p, 0.01, &e, &g, fbox).unwrap();
        let free = reference_free(|x| p.density(x), 36.0, 0.01, k.gamma_ds, 0.75, &g, fbox).unwrap();
        for (a, b) in spec.values.iter().zip(&free.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn aliasing_guard() {
        let p = InitialProfile::Gaussian { center: 30.0, sigma: 0.5 };
        let g = GridSpec { lo: 0.0, hi: 8.0, bins: 8 };
        assert!(reference_specular(&p, 0.1, &eq(), &g, FourierBox::default()).is_err());
        let pm = InitialProfile::PointMass(1.0);
        assert!(reference_specular(&pm, 0.1, &eq(), &g, FourierBox::default()).is_err());
    }
}
