//! Discrete distances between gridded densities.

use serde::Serialize;

use crate::density::DensityField;
use crate::error::{FracError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparison {
    /// ‖A − B‖₂ / ‖B‖₂ over the window.
    pub l2_rel: f64,
    /// max|A − B| / max|B|.
    pub linf_rel: f64,
    /// |mass(A) − mass(B)| inside the window.
    pub mass_gap: f64,
    /// Sampling noise of A and B combined, relative to ‖B‖₂: differences
    /// below this level are not resolved.
    pub noise_rel: f64,
}

/// Compares `a` against the reference `b`. Fields on the same window but
/// with different bin counts are conservatively rebinned to the coarser
/// grid.
pub fn compare(a: &DensityField, b: &DensityField) -> Result<Comparison> {
    let same = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()));
    if !same(a.lo, b.lo) || !same(a.hi, b.hi) {
        return Err(FracError::Incompatible(format!("windows [{}, {}] and [{}, {}] differ", a.lo, a.hi, b.lo, b.hi)));
    }
    let bins = a.bins().min(b.bins());
    let ra;
    let rb;
    let (a, b) = if a.bins() == b.bins() {
        (a, b)
    } else {
        ra = a.rebin(a.lo, a.hi, bins);
        rb = b.rebin(b.lo, b.hi, bins);
        (&ra, &rb)
    };
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    let mut noise2 = 0.0;
    let mut dmax: f64 = 0.0;
    let mut bmax: f64 = 0.0;
    for i in 0..bins {
        let d = a.values[i] - b.values[i];
        diff2 += d * d;
        ref2 += b.values[i] * b.values[i];
        noise2 += a.stderr[i].powi(2) + b.stderr[i].powi(2);
        dmax = dmax.max(d.abs());
        bmax = bmax.max(b.values[i].abs());
    }
    if ref2 == 0.0 {
        return Err(FracError::Incompatible("reference field is identically zero".into()));
    }
    Ok(Comparison {
        l2_rel: (diff2 / ref2).sqrt(),
        linf_rel: dmax / bmax,
        mass_gap: (a.mass() - b.mass()).abs(),
        noise_rel: (noise2 / ref2).sqrt(),
    })
}
