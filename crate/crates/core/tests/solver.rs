//! Galerkin solver against the pointwise operators and the Fourier reference.

use fraclimit_core::kinetic::{GridSpec, InitialProfile};
use fraclimit_core::ops::{flux_corrected, op_d2sm1, op_lm, OpContext};
use fraclimit_core::solver::*;
use fraclimit_core::testfn::ds_family;
use fraclimit_core::{make_default_equilibrium, Equilibrium, ModelParams};
use nalgebra::DVector;

fn eq(s: f64) -> Equilibrium {
    make_default_equilibrium(ModelParams { s, ..Default::default() }).unwrap()
}

/// Manufactured solution: g = ψ − L_M ψ for a flux-free ψ, with the two
/// effects of cutting the domain at L added back (kernel mass beyond L for
/// the specular part, the nonlocal flux through x = L for the diffuse part).
#[test]
fn manufactured_solution_converges() {
    let e = eq(0.75);
    let ctx = OpContext::limit_only(&e);
    let k = e.constants();
    let s = 0.75;
    let l = DEFAULT_LENGTH;
    let psi = flux_corrected(&ds_family()[0], &ctx).unwrap();
    let far_flux = op_d2sm1(&psi, &[l, 0.0, 0.0], &ctx).unwrap()[0];
    for alpha in [0.0, 0.5, 1.0] {
        let mut errs = Vec::new();
        for nodes in [80, 160, 320] {
            let mesh = Mesh1D::graded(l, nodes, DEFAULT_GRADING).unwrap();
            let f = assemble(&mesh, &e).unwrap();
            let g: Vec<f64> = mesh
                .nodes
                .iter()
                .map(|&x| {
                    let lm = op_lm(&psi, &[x.max(1e-3), 0.0, 0.0], &ctx, alpha).unwrap();
                    let cut = k.gamma1 * psi.q(x) * ((l - x).max(1e-12).powf(-2.0 * s) + (l + x).powf(-2.0 * s)) / (2.0 * s);
                    psi.q(x) - lm - (1.0 - alpha) * cut
                })
                .collect();
            let mut load: Vec<f64> = (&f.m * DVector::from_column_slice(&g)).iter().copied().collect();
            *load.last_mut().unwrap() += alpha * far_flux;
            let u = solve_with_load(&f, alpha, &load).unwrap();
            let err = mesh
                .nodes
                .iter()
                .zip(&u)
                .filter(|(x, _)| **x <= l / 2.0)
                .map(|(x, u)| (u - psi.q(*x)).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "alpha {alpha}: {errs:?}");
        assert!(errs[2] < 1e-3, "alpha {alpha}: {errs:?}");
    }
}

#[test]
fn coercive_on_64_nodes() {
    let f = assemble(&Mesh1D::graded(DEFAULT_LENGTH, 64, DEFAULT_GRADING).unwrap(), &eq(0.75)).unwrap();
    for alpha in [0.0, 0.5, 1.0] {
        let sys = &f.m + f.form(alpha).unwrap();
        let lmin = sys.symmetric_eigenvalues().min();
        // the mass matrix alone bounds it below by its own smallest eigenvalue
        let mmin = f.m.symmetric_eigenvalues().min();
        assert!(lmin > 0.0 && lmin >= 0.999 * mmin, "alpha {alpha}: {lmin}");
    }
}

fn bump_solution(f: &AssembledForms, alpha: f64) -> Vec<f64> {
    let g = interpolate(&f.mesh, |x| (-(x - 2.0f64).powi(2) / 0.5).exp());
    solve_stationary(f, alpha, &g).unwrap()
}

#[test]
fn stationary_mesh_convergence() {
    let e = eq(0.75);
    let probe: Vec<f64> = (0..=80).map(|i| 0.1 * i as f64).collect();
    for alpha in [0.0, 1.0] {
        let mut gaps = Vec::new();
        let sample = |nodes: usize| {
            let f = assemble(&Mesh1D::graded(DEFAULT_LENGTH, nodes, DEFAULT_GRADING).unwrap(), &e).unwrap();
            let u = bump_solution(&f, alpha);
            probe.iter().map(|&x| f.mesh.eval(&u, x)).collect::<Vec<_>>()
        };
        let levels: Vec<Vec<f64>> = [40, 80, 160, 320].iter().map(|&n| sample(n)).collect();
        for w in levels.windows(2) {
            gaps.push(w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "alpha {alpha}: {gaps:?}");
    }
}

#[test]
fn alpha_continuity() {
    let f = assemble(&Mesh1D::graded(DEFAULT_LENGTH, 96, DEFAULT_GRADING).unwrap(), &eq(0.75)).unwrap();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    for alpha in [0.0f64, 0.5, 1.0] {
        let u = bump_solution(&f, alpha);
        let gaps: Vec<f64> = [0.05, 0.025, 0.0125]
            .iter()
            .map(|d| {
                let other = if alpha + d <= 1.0 { alpha + d } else { alpha - d };
                dist(&u, &bump_solution(&f, other))
            })
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "alpha {alpha}: {gaps:?}");
    }
}

#[test]
fn specular_evolution_matches_fourier_reference() {
    let e = eq(0.75);
    let p = InitialProfile::Gaussian { center: 2.0, sigma: 0.5 };
    let grid = GridSpec { lo: 0.0, hi: 8.0, bins: 80 };
    let reference = reference_specular(&p, 0.5, &e, &grid, FourierBox::default()).unwrap();
    let mesh = Mesh1D::graded(32.0, 200, DEFAULT_GRADING).unwrap();
    let f = assemble(&mesh, &e).unwrap();
    let u0 = l2_project(&mesh, &f.m, |x| p.density(x)).unwrap();
    let ev = evolve_snapshots(&f, 0.0, &u0, &[0.5], 0.005).unwrap();
    let c = compare(&to_field(&mesh, &ev.states[0], &grid, 0.5), &reference).unwrap();
    assert!(c.l2_rel < 5e-3, "{c:?}");
}
