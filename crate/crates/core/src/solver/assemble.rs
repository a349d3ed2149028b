//! P1 Galerkin matrices of the limit bilinear forms on a truncated
//! half-line:
//!
//! a_SR(u, v) = ½γ₁∬ (u(y) − u(x))(v(y) − v(x)) (|x − y|^{−1−2s} + (x + y)^{−1−2s}) dx dy,
//! a_D(u, v)  = ∫ 𝒟^{2s−1}[u] v' dx = γ₀/(2s − 1) ∬ u'(y) v'(x) |x − y|^{1−2s} dx dy,
//!
//! both over [0, L]².

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::mesh::Mesh1D;
use crate::equilibrium::{Constants, Equilibrium};
use crate::error::{FracError, Result};
use crate::quad::gauss_legendre_on;

/// Gauss–Legendre order of the Duffy angular variable.
const DUFFY_ORDER: usize = 24;

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureInfo {
    pub duffy_order: usize,
    pub near_order: usize,
    pub far_order: usize,
}

#[derive(Clone, Debug)]
pub struct AssembledForms {
    pub mesh: Mesh1D,
    pub s: f64,
    pub constants: Constants,
    /// Consistent mass matrix.
    pub m: DMatrix<f64>,
    pub a_sr: DMatrix<f64>,
    /// Present when s > 1/2.
    pub a_d: Option<DMatrix<f64>>,
    pub quadrature: QuadratureInfo,
}

impl AssembledForms {
    /// (1 − α)A_SR + αA_D.
    pub fn form(&self, alpha: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(FracError::InvalidParams(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if alpha == 0.0 {
            return Ok(self.a_sr.clone());
        }
        let a_d = self.a_d.as_ref().ok_or_else(|| {
            FracError::InvalidParams(format!("alpha > 0 requires s > 1/2 (got s = {})", self.s))
        })?;
        if alpha == 1.0 {
            return Ok(a_d.clone());
        }
        Ok(&self.a_sr * (1.0 - alpha) + a_d * alpha)
    }

    pub fn n(&self) -> usize {
        self.mesh.len()
    }
}

/// Value on element `e` of the hat function of node `i` at `z`.
fn hat_on(mesh: &Mesh1D, e: usize, i: usize, z: f64) -> f64 {
    let (a, b) = (mesh.nodes[e], mesh.nodes[e + 1]);
    if i == e {
        (b - z) / (b - a)
    } else if i == e + 1 {
        (z - a) / (b - a)
    } else {
        0.0
    }
}

/// Slope on element `e` of the hat function of node `i`.
fn slope_on(mesh: &Mesh1D, e: usize, i: usize) -> f64 {
    let h = mesh.size(e);
    if i == e {
        -1.0 / h
    } else if i == e + 1 {
        1.0 / h
    } else {
        0.0
    }
}

fn union_dofs(a: usize, b: usize) -> Vec<usize> {
    let mut d = vec![a, a + 1, b, b + 1];
    d.sort_unstable();
    d.dedup();
    d
}

type Block = (Vec<usize>, Vec<f64>);

struct PairIntegrator<'a> {
    mesh: &'a Mesh1D,
    s: f64,
    /// ∫∫_{[0,1]²}(y − x)²(x + y)^{−1−2s}, the mirror term on the corner element.
    corner: f64,
    duffy: Vec<(f64, f64)>,
    rules: Vec<(usize, Vec<(f64, f64)>)>,
}

impl<'a> PairIntegrator<'a> {
    fn new(mesh: &'a Mesh1D, s: f64) -> Self {
        let duffy = gauss_legendre_on(DUFFY_ORDER, 0.0, 1.0);
        let corner = 2.0 / (3.0 - 2.0 * s)
            * duffy.iter().map(|(u, w)| w * (1.0 - u).powi(2) * (1.0 + u).powf(-1.0 - 2.0 * s)).sum::<f64>();
        let rules = [5usize, 8, 12, 20].iter().map(|&n| (n, gauss_legendre_on(n, 0.0, 1.0))).collect();
        PairIntegrator {
            mesh,
            s,
            corner,
            duffy,
            rules,
        }
    }

    fn rule(&self, ratio: f64) -> &[(f64, f64)] {
        let k = if ratio < 0.5 {
            3
        } else if ratio < 2.0 {
            2
        } else if ratio < 6.0 {
            1
        } else {
            0
        };
        &self.rules[k].1
    }

    /// Tensor Gauss rule on E_a × E_b for the kernel `k`.
    fn tensor<K: Fn(f64, f64) -> f64>(&self, a: usize, b: usize, dofs: &[usize], rule: &[(f64, f64)], k: K, out: &mut [f64]) {
        let m = self.mesh;
        let (ha, hb) = (m.size(a), m.size(b));
        let nd = dofs.len();
        let mut diff = [0.0; 4];
        for (u, wu) in rule {
            let x = m.nodes[a] + ha * u;
            for (v, wv) in rule {
                let y = m.nodes[b] + hb * v;
                let w = wu * wv * ha * hb * k(x, y);
                for (p, &i) in dofs.iter().enumerate() {
                    diff[p] = hat_on(m, b, i, y) - hat_on(m, a, i, x);
                }
                for p in 0..nd {
                    for q in 0..nd {
                        out[p * nd + q] += w * diff[p] * diff[q];
                    }
                }
            }
        }
    }

    /// Singular part on touching elements a, a + 1 by Duffy splitting at
    /// the shared node; the radial integral ∫t^{2−2s} is exact.
    fn duffy_touching(&self, a: usize, dofs: &[usize], out: &mut [f64]) {
        let m = self.mesh;
        let b = a + 1;
        let z = m.nodes[b];
        let (ha, hb) = (m.size(a), m.size(b));
        let p = -1.0 - 2.0 * self.s;
        let radial = 1.0 / (3.0 - 2.0 * self.s);
        let nd = dofs.len();
        let mut diff = [0.0; 4];
        for (u, w) in &self.duffy {
            // (ξ, η) at t = 1 on each triangle
            for (xi, eta) in [(ha, hb * u), (ha * u, hb)] {
                let x = z - xi;
                let y = z + eta;
                let wt = w * ha * hb * radial * (xi + eta).powf(p);
                for (k, &i) in dofs.iter().enumerate() {
                    diff[k] = hat_on(m, b, i, y) - hat_on(m, a, i, x);
                }
                for k in 0..nd {
                    for l in 0..nd {
                        out[k * nd + l] += wt * diff[k] * diff[l];
                    }
                }
            }
        }
    }

    /// ∬_{E_a × E_b} of (φ_i(y) − φ_i(x))(φ_j(y) − φ_j(x)) times the full
    /// kernel, for a ≤ b.
    fn block(&self, a: usize, b: usize) -> Block {
        let m = self.mesh;
        let dofs = union_dofs(a, b);
        let nd = dofs.len();
        let mut out = vec![0.0; nd * nd];
        let s = self.s;
        let p = -1.0 - 2.0 * s;
        let mirror = |x: f64, y: f64| (x + y).powf(p);
        let direct = |x: f64, y: f64| (x - y).abs().powf(p);
        if a == b {
            let h = m.size(a);
            let g: Vec<f64> = dofs.iter().map(|&i| slope_on(m, a, i)).collect();
            let main = 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
            for k in 0..nd {
                for l in 0..nd {
                    out[k * nd + l] += g[k] * g[l] * main;
                }
            }
            if a == 0 {
                let c = h.powf(3.0 - 2.0 * s) * self.corner;
                for k in 0..nd {
                    for l in 0..nd {
                        out[k * nd + l] += g[k] * g[l] * c;
                    }
                }
            } else {
                let ratio = 2.0 * m.nodes[a] / h;
                self.tensor(a, a, &dofs, self.rule(ratio), mirror, &mut out);
            }
        } else {
            let hmax = m.size(a).max(m.size(b));
            if b == a + 1 {
                self.duffy_touching(a, &dofs, &mut out);
            } else {
                let ratio = (m.nodes[b] - m.nodes[a + 1]) / hmax;
                self.tensor(a, b, &dofs, self.rule(ratio), direct, &mut out);
            }
            let ratio = (m.nodes[a] + m.nodes[b]) / hmax;
            self.tensor(a, b, &dofs, self.rule(ratio), mirror, &mut out);
        }
        (dofs, out)
    }
}

/// ∫_{a0}^{a1}∫_{b0}^{b1} |x − y|^{1−2s} dy dx in closed form.
fn riesz_rect(a0: f64, a1: f64, b0: f64, b1: f64, s: f64) -> f64 {
    let p = 1.0 - 2.0 * s;
    let g = |t: f64| t.abs().powf(p + 2.0) / ((p + 1.0) * (p + 2.0));
    -(g(a1 - b1) - g(a1 - b0) - g(a0 - b1) + g(a0 - b0))
}

fn mass_matrix(mesh: &Mesh1D) -> DMatrix<f64> {
    let n = mesh.len();
    let mut m = DMatrix::zeros(n, n);
    for e in 0..mesh.elements() {
        let h = mesh.size(e);
        m[(e, e)] += h / 3.0;
        m[(e + 1, e + 1)] += h / 3.0;
        m[(e, e + 1)] += h / 6.0;
        m[(e + 1, e)] += h / 6.0;
    }
    m
}

fn scatter(target: &mut DMatrix<f64>, (dofs, vals): &Block, factor: f64) {
    let nd = dofs.len();
    for (k, &i) in dofs.iter().enumerate() {
        for (l, &j) in dofs.iter().enumerate() {
            target[(i, j)] += factor * vals[k * nd + l];
        }
    }
}

/// Assembles M, A_SR and (for s > 1/2) A_D. Element-pair rows run in
/// parallel on the current rayon pool; blocks are merged in a fixed order
/// so the result does not depend on the number of workers.
pub fn assemble(mesh: &Mesh1D, eq: &Equilibrium) -> Result<AssembledForms> {
    if eq.d() != 1 {
        return Err(FracError::Unsupported(format!("Galerkin assembly is one-dimensional (got d = {})", eq.d())));
    }
    let s = eq.params.s;
    let k = eq.constants();
    let n_el = mesh.elements();
    let integ = PairIntegrator::new(mesh, s);
    let rows: Vec<Vec<(usize, Block)>> = (0..n_el)
        .into_par_iter()
        .map(|a| (a..n_el).map(|b| (b, integ.block(a, b))).collect())
        .collect();
    let n = mesh.len();
    let mut a_sr = DMatrix::zeros(n, n);
    for (a, row) in rows.iter().enumerate() {
        for (b, blk) in row {
            let f = if *b == a { 0.5 } else { 1.0 };
            scatter(&mut a_sr, blk, f * k.gamma1);
        }
    }
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a_sr[(i, j)] + a_sr[(j, i)]);
            a_sr[(i, j)] = v;
            a_sr[(j, i)] = v;
        }
    }
    for v in a_sr.iter() {
        if !v.is_finite() {
            return Err(FracError::Quadrature("non-finite entry in the specular stiffness matrix".into()));
        }
    }
    let a_d = if s > 0.5 {
        let c = k.gamma0 / (2.0 * s - 1.0);
        let mut a_d = DMatrix::zeros(n, n);
        for a in 0..n_el {
            for b in 0..n_el {
                let r = c * riesz_rect(mesh.nodes[a], mesh.nodes[a + 1], mesh.nodes[b], mesh.nodes[b + 1], s);
                for i in [a, a + 1] {
                    let gi = slope_on(mesh, a, i);
                    for j in [b, b + 1] {
                        a_d[(i, j)] += gi * slope_on(mesh, b, j) * r;
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (a_d[(i, j)] + a_d[(j, i)]);
                a_d[(i, j)] = v;
                a_d[(j, i)] = v;
            }
        }
        Some(a_d)
    } else {
        None
    };
    Ok(AssembledForms {
        mesh: mesh.clone(),
        s,
        constants: k,
        m: mass_matrix(mesh),
        a_sr,
        a_d,
        quadrature: QuadratureInfo {
            duffy_order: DUFFY_ORDER,
            near_order: 20,
            far_order: 5,
        },
    })
}
