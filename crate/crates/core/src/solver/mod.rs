//! Galerkin discretisation of the limit problem on a truncated half-line,
//! implicit Euler in time, and Fourier reference solutions.

pub mod assemble;
pub mod compare;
pub mod evolve;
pub mod mesh;
pub mod reference;

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

pub use assemble::{assemble, AssembledForms, QuadratureInfo};
pub use compare::{compare, Comparison};
pub use evolve::{energy, evolve, evolve_snapshots, mass, Evolution};
pub use mesh::{Mesh1D, DEFAULT_GRADING, DEFAULT_LENGTH};
pub use reference::{reference_free, reference_specular, FourierBox};

use crate::density::DensityField;
use crate::error::{FracError, Result};
use crate::kinetic::GridSpec;
use crate::quad::gauss_legendre_on;

/// Nodal interpolant of `f`.
pub fn interpolate<F: Fn(f64) -> f64>(mesh: &Mesh1D, f: F) -> Vec<f64> {
    mesh.nodes.iter().map(|&x| f(x)).collect()
}

/// L² projection of `f` (8 Gauss points per element), which keeps the mass
/// of discontinuous data.
pub fn l2_project<F: Fn(f64) -> f64>(mesh: &Mesh1D, m: &DMatrix<f64>, f: F) -> Result<Vec<f64>> {
    let mut b = DVector::zeros(mesh.len());
    for e in 0..mesh.elements() {
        let (x0, x1) = (mesh.nodes[e], mesh.nodes[e + 1]);
        for (x, w) in gauss_legendre_on(8, x0, x1) {
            let fx = f(x);
            let t = (x - x0) / (x1 - x0);
            b[e] += w * fx * (1.0 - t);
            b[e + 1] += w * fx * t;
        }
    }
    let chol = m.clone().cholesky().ok_or_else(|| FracError::Numeric("mass matrix is not positive definite".into()))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

/// Bin averages of the piecewise-linear field `u`.
pub fn to_field(mesh: &Mesh1D, u: &[f64], grid: &GridSpec, t: f64) -> DensityField {
    DensityField::from_fn(|x| if x <= mesh.length() { mesh.eval(u, x) } else { 0.0 }, grid.lo, grid.hi, grid.bins, t)
}

/// Solves (M + (1 − α)A_SR + αA_D)u = Mg for nodal data g.
pub fn solve_stationary(forms: &AssembledForms, alpha: f64, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != forms.n() {
        return Err(FracError::InvalidParams(format!("load has {} values for {} nodes", g.len(), forms.n())));
    }
    let load: Vec<f64> = (&forms.m * DVector::from_column_slice(g)).iter().copied().collect();
    solve_with_load(forms, alpha, &load)
}

/// Solves (M + (1 − α)A_SR + αA_D)u = b for an assembled load vector b.
pub fn solve_with_load(forms: &AssembledForms, alpha: f64, load: &[f64]) -> Result<Vec<f64>> {
    if load.len() != forms.n() {
        return Err(FracError::InvalidParams(format!("load has {} values for {} nodes", load.len(), forms.n())));
    }
    let sys = &forms.m + forms.form(alpha)?;
    let rhs = DVector::from_column_slice(load);
    let u = match sys.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => {
            let sv = sys.singular_values();
            let cond = sv.max() / sv.min();
            return Err(FracError::Numeric(format!("stationary system is not positive definite (condition estimate {cond:.3e})")));
        }
    };
    if u.iter().any(|v| !v.is_finite()) {
        return Err(FracError::Numeric("non-finite stationary solution".into()));
    }
    Ok(u.iter().copied().collect())
}

/// Writes a dense matrix in MatrixMarket coordinate format, skipping exact zeros.
pub fn write_matrix_market(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Nodal snapshot as `x,rho` CSV.
pub fn write_nodal_csv(mesh: &Mesh1D, u: &[f64], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,rho")?;
    for (x, v) in mesh.nodes.iter().zip(u) {
        writeln!(w, "{x:.17e},{v:.17e}")?;
    }
    w.flush()?;
    Ok(())
}
