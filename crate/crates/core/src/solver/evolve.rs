//! Implicit Euler for ∂_t ρ = L_M[ρ] in the Galerkin form
//! (M + dt A)u^{n+1} = M u^n.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::assemble::AssembledForms;
use crate::error::{FracError, Result};

#[derive(Clone, Debug)]
pub struct Evolution {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// 1ᵀMu.
pub fn mass(forms: &AssembledForms, u: &[f64]) -> f64 {
    (&forms.m * DVector::from_column_slice(u)).sum()
}

/// uᵀMu.
pub fn energy(forms: &AssembledForms, u: &[f64]) -> f64 {
    let v = DVector::from_column_slice(u);
    v.dot(&(&forms.m * &v))
}

fn factor(forms: &AssembledForms, a: &DMatrix<f64>, dt: f64) -> Result<Cholesky<f64, Dyn>> {
    (&forms.m + a * dt)
        .cholesky()
        .ok_or_else(|| FracError::Numeric(format!("implicit Euler matrix not positive definite at dt = {dt}")))
}

fn check(u0: &[f64], forms: &AssembledForms, dt: f64) -> Result<()> {
    if u0.len() != forms.n() {
        return Err(FracError::InvalidParams(format!("initial vector has {} values for {} nodes", u0.len(), forms.n())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FracError::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// `steps` steps of size `dt`, keeping every state.
pub fn evolve(forms: &AssembledForms, alpha: f64, u0: &[f64], steps: usize, dt: f64) -> Result<Evolution> {
    check(u0, forms, dt)?;
    let a = forms.form(alpha)?;
    let chol = factor(forms, &a, dt)?;
    let mut u = DVector::from_column_slice(u0);
    let mut out = Evolution {
        dt,
        times: vec![0.0],
        states: vec![u0.to_vec()],
    };
    for n in 1..=steps {
        u = chol.solve(&(&forms.m * &u));
        out.times.push(n as f64 * dt);
        out.states.push(u.iter().copied().collect());
    }
    Ok(out)
}

/// Advances to each of the sorted `times` with steps no longer than
/// `dt_max`; every interval gets a whole number of equal steps.
pub fn evolve_snapshots(forms: &AssembledForms, alpha: f64, u0: &[f64], times: &[f64], dt_max: f64) -> Result<Evolution> {
    check(u0, forms, dt_max)?;
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(FracError::InvalidParams("snapshot times must be non-negative and increasing".into()));
    }
    let a = forms.form(alpha)?;
    let mut cache: Vec<(u64, Cholesky<f64, Dyn>)> = Vec::new();
    let mut u = DVector::from_column_slice(u0);
    let mut t = 0.0;
    let mut out = Evolution {
        dt: dt_max,
        times: Vec::new(),
        states: Vec::new(),
    };
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let n = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            let key = dt.to_bits();
            if !cache.iter().any(|(k, _)| *k == key) {
                cache.push((key, factor(forms, &a, dt)?));
            }
            let chol = &cache.iter().find(|(k, _)| *k == key).expect("inserted above").1;
            for _ in 0..n {
                u = chol.solve(&(&forms.m * &u));
            }
        }
        t = target;
        out.times.push(target);
        out.states.push(u.iter().copied().collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::make_default_equilibrium;
    use crate::params::ModelParams;
    use crate::solver::{assemble, l2_project, Mesh1D};

    fn forms() -> AssembledForms {
        let eq = make_default_equilibrium(ModelParams { s: 0.75, ..Default::default() }).unwrap();
        assemble(&Mesh1D::graded(16.0, 64, 1.15).unwrap(), &eq).unwrap()
    }

    #[test]
    fn mass_and_energy() {
        let f = forms();
        let u0 = l2_project(&f.mesh, &f.m, |x| (-(x - 2.0f64).powi(2) / 0.5).exp()).unwrap();
        let m0 = mass(&f, &u0);
        for alpha in [0.0, 0.5, 1.0] {
            let ev = evolve(&f, alpha, &u0, 100, 0.01).unwrap();
            let mut e_prev = f64::INFINITY;
            for u in &ev.states {
                assert!((mass(&f, u) - m0).abs() < 1e-6 * m0);
                let e = energy(&f, u);
                assert!(e <= e_prev * (1.0 + 1e-12));
                e_prev = e;
            }
            assert!(e_prev < energy(&f, &u0));
        }
    }

    #[test]
    fn constants_stay_put() {
        let f = forms();
        let ev = evolve(&f, 0.5, &vec![2.0; f.n()], 10, 0.1).unwrap();
        assert!(ev.states[10].iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn snapshots_match_plain_stepping() {
        let f = forms();
        let u0 = l2_project(&f.mesh, &f.m, |x| (-(x - 2.0f64).powi(2)).exp()).unwrap();
        let a = evolve(&f, 1.0, &u0, 20, 0.025).unwrap();
        let b = evolve_snapshots(&f, 1.0, &u0, &[0.25, 0.5], 0.025).unwrap();
        for (x, y) in a.states[20].iter().zip(&b.states[1]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(evolve_snapshots(&f, 0.0, &u0, &[0.5, 0.25], 0.1).is_err());
    }
}
