//! Wall-graded P1 meshes on [0, L].

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};

pub const DEFAULT_GRADING: f64 = 1.15;
pub const DEFAULT_LENGTH: f64 = 16.0;

/// Nodes of a one-dimensional mesh; the first node is the wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub nodes: Vec<f64>,
    /// Geometric grading factor near the wall (1 for uniform meshes).
    pub grading: f64,
}

impl Mesh1D {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Mesh1D> {
        if nodes.len() < 2 || nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FracError::InvalidParams("mesh nodes must start at 0 and increase strictly".into()));
        }
        Ok(Mesh1D { nodes, grading: 1.0 })
    }

    pub fn uniform(length: f64, elements: usize) -> Result<Mesh1D> {
        if !(length > 0.0) || elements == 0 {
            return Err(FracError::InvalidParams(format!("bad uniform mesh: L = {length}, elements = {elements}")));
        }
        Mesh1D::from_nodes((0..=elements).map(|k| length * k as f64 / elements as f64).collect())
    }

    /// `nodes` nodes on [0, L]: sizes grow geometrically by `ratio` from the
    /// wall until they reach a common cap, then stay constant. The grading
    /// depth is ln 20/ln ratio elements (a 20× size range), or a third of the
    /// elements on coarse meshes.
    pub fn graded(length: f64, nodes: usize, ratio: f64) -> Result<Mesh1D> {
        if !(length > 0.0) || nodes < 3 || !(ratio >= 1.0) {
            return Err(FracError::InvalidParams(format!(
                "bad graded mesh: L = {length}, nodes = {nodes}, ratio = {ratio}"
            )));
        }
        let n_el = nodes - 1;
        let depth = if ratio > 1.0 { ((20f64.ln() / ratio.ln()).round() as usize).min(n_el / 3) } else { 0 };
        let rel: Vec<f64> = (0..n_el)
            .map(|k| if k < depth { ratio.powi(k as i32 - depth as i32) } else { 1.0 })
            .collect();
        let cap = length / rel.iter().sum::<f64>();
        let mut x = vec![0.0];
        for r in &rel {
            x.push(x.last().unwrap() + r * cap);
        }
        *x.last_mut().unwrap() = length;
        let mut m = Mesh1D::from_nodes(x)?;
        m.grading = ratio;
        Ok(m)
    }

    /// Graded mesh whose far-field element size is about `h`.
    pub fn graded_with_size(length: f64, h: f64, ratio: f64) -> Result<Mesh1D> {
        if !(h > 0.0) {
            return Err(FracError::InvalidParams(format!("element size must be positive, got {h}")));
        }
        let mut n = (length / h).ceil() as usize + 1;
        loop {
            let m = Mesh1D::graded(length, n.max(3), ratio)?;
            if m.max_size() <= h * (1.0 + 1e-12) {
                return Ok(m);
            }
            n += 1 + n / 50;
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn size(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn max_size(&self) -> f64 {
        (0..self.elements()).map(|e| self.size(e)).fold(0.0, f64::max)
    }

    pub fn min_size(&self) -> f64 {
        (0..self.elements()).map(|e| self.size(e)).fold(f64::INFINITY, f64::min)
    }

    /// Element containing `x` (the last one for x = L), or None outside.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0 && x <= self.length()) {
            return None;
        }
        Some((self.nodes.partition_point(|&n| n <= x).max(1) - 1).min(self.elements() - 1))
    }

    /// Value of the P1 function with nodal values `u` at `x` (0 outside).
    pub fn eval(&self, u: &[f64], x: f64) -> f64 {
        match self.locate(x) {
            Some(e) => {
                let t = (x - self.nodes[e]) / self.size(e);
                (1.0 - t) * u[e] + t * u[e + 1]
            }
            None => 0.0,
        }
    }

    /// Compact textual descriptor for manifests.
    pub fn descriptor(&self) -> String {
        format!(
            "graded(L={}, nodes={}, ratio={}, hmin={:.4e}, hmax={:.4e})",
            self.length(),
            self.len(),
            self.grading,
            self.min_size(),
            self.max_size()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn graded_shape() {
        let m = Mesh1D::graded(16.0, 64, 1.15).unwrap();
        assert_eq!(m.len(), 64);
        assert_eq!(m.nodes[0], 0.0);
        assert_eq!(m.length(), 16.0);
        let r = m.size(1) / m.size(0);
        assert!((r - 1.15).abs() < 1e-12);
        assert!(m.max_size() / m.min_size() > 5.0);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(Mesh1D::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Mesh1D::from_nodes(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn size_targeting() {
        let m = Mesh1D::graded_with_size(16.0, 0.1, 1.15).unwrap();
        assert!(m.max_size() <= 0.1 + 1e-12);
        assert!(m.max_size() > 0.09);
    }

    proptest! {
        #[test]
        fn interpolation_is_exact_on_linears(a in -3.0..3.0f64, b in -3.0..3.0f64, x in 0.0..16.0f64) {
            let m = Mesh1D::graded(16.0, 40, 1.15).unwrap();
            let u: Vec<f64> = m.nodes.iter().map(|n| a + b * n).collect();
            prop_assert!((m.eval(&u, x) - (a + b * x)).abs() < 1e-10);
        }
    }
}
