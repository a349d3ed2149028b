//! Gridded densities along the normal coordinate.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};
use crate::rng::RandomStream;

/// Piecewise-constant density on uniform bins over `[lo, hi]`. For d ≥ 2
/// this is the marginal along the normal coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    /// Per-bin standard error; zero for deterministic fields.
    pub stderr: Vec<f64>,
    pub t: f64,
    /// Fraction of the unit mass outside the window.
    pub out_of_window: f64,
}

impl DensityField {
    pub fn zeros(lo: f64, hi: f64, bins: usize, t: f64) -> Self {
        DensityField {
            lo,
            hi,
            values: vec![0.0; bins],
            stderr: vec![0.0; bins],
            t,
            out_of_window: 0.0,
        }
    }

    /// Normalised histogram of `n` samples.
    pub fn from_samples<I: IntoIterator<Item = f64>>(xs: I, n: usize, lo: f64, hi: f64, bins: usize, t: f64) -> Self {
        let mut counts = vec![0u64; bins];
        let mut outside = 0u64;
        let h = (hi - lo) / bins as f64;
        for x in xs {
            if x >= lo && x < hi {
                let b = (((x - lo) / h) as usize).min(bins - 1);
                counts[b] += 1;
            } else {
                outside += 1;
            }
        }
        let scale = 1.0 / (n as f64 * h);
        DensityField {
            lo,
            hi,
            values: counts.iter().map(|&c| c as f64 * scale).collect(),
            stderr: counts.iter().map(|&c| (c as f64).sqrt() * scale).collect(),
            t,
            out_of_window: outside as f64 / n as f64,
        }
    }

    /// Bin averages of a function, by 8-point Gauss–Legendre per bin.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, bins: usize, t: f64) -> Self {
        let mut out = DensityField::zeros(lo, hi, bins, t);
        let h = out.bin_width();
        for b in 0..bins {
            let a = lo + b as f64 * h;
            out.values[b] = crate::quad::gauss_legendre_on(8, a, a + h).iter().map(|(x, w)| w * f(*x)).sum::<f64>() / h;
        }
        out.out_of_window = (1.0 - out.mass()).max(0.0);
        out
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.values.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let h = self.bin_width();
        (0..self.bins()).map(|b| self.lo + (b as f64 + 0.5) * h).collect()
    }

    /// Mass inside the window.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_width()
    }

    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.lo || x >= self.hi {
            return 0.0;
        }
        let b = (((x - self.lo) / self.bin_width()) as usize).min(self.bins() - 1);
        self.values[b]
    }

    /// Draws a point from the normalised piecewise-constant law.
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        let m = self.mass();
        let u = rng.uniform() * m;
        let h = self.bin_width();
        let mut acc = 0.0;
        for (b, v) in self.values.iter().enumerate() {
            let next = acc + v * h;
            if u < next || b + 1 == self.bins() {
                let t = if *v > 0.0 { (u - acc) / (v * h) } else { 0.5 };
                return self.lo + (b as f64 + t.clamp(0.0, 1.0)) * h;
            }
            acc = next;
        }
        self.hi
    }

    pub fn scaled(&self, c: f64) -> DensityField {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v *= c);
        f.stderr.iter_mut().for_each(|v| *v *= c.abs());
        f
    }

    /// Conservative rebinning onto `[lo, hi]` with `bins` bins; mass falling
    /// outside the source window counts as zero density.
    pub fn rebin(&self, lo: f64, hi: f64, bins: usize) -> DensityField {
        let mut out = DensityField::zeros(lo, hi, bins, self.t);
        let h = out.bin_width();
        let hs = self.bin_width();
        let mut var = vec![0.0; bins];
        for b in 0..bins {
            let a = lo + b as f64 * h;
            let e = a + h;
            let first = (((a - self.lo) / hs).floor().max(0.0)) as usize;
            let last = (((e - self.lo) / hs).ceil().max(0.0) as usize).min(self.bins());
            let mut m = 0.0;
            for j in first..last {
                let ja = self.lo + j as f64 * hs;
                let overlap = (e.min(ja + hs) - a.max(ja)).max(0.0);
                m += self.values[j] * overlap;
                var[b] += (self.stderr[j] * overlap).powi(2);
            }
            out.values[b] = m / h;
            out.stderr[b] = var[b].sqrt() / h;
        }
        out.out_of_window = (self.out_of_window + self.mass() - out.mass()).max(0.0);
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# t={} lo={} hi={} out_of_window={}", self.t, self.lo, self.hi, self.out_of_window)?;
        writeln!(w, "x,rho,stderr")?;
        for ((x, v), e) in self.centers().iter().zip(&self.values).zip(&self.stderr) {
            writeln!(w, "{x:e},{v:e},{e:e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<DensityField> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut meta: Option<(f64, f64, f64, f64)> = None;
        let mut values = Vec::new();
        let mut stderr = Vec::new();
        let fmt = |i: usize, m: &str| FracError::Format(format!("{}:{}: {m}", path.display(), i + 1));
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                let mut kv = std::collections::HashMap::new();
                for tok in rest.split_whitespace() {
                    if let Some((k, v)) = tok.split_once('=') {
                        kv.insert(k.to_string(), v.parse::<f64>().map_err(|_| fmt(i, "bad header value"))?);
                    }
                }
                let get = |k: &str| kv.get(k).copied().ok_or_else(|| fmt(i, &format!("missing {k}")));
                meta = Some((get("t")?, get("lo")?, get("hi")?, get("out_of_window").unwrap_or(0.0)));
                continue;
            }
            if line.starts_with("x,") || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() < 2 {
                return Err(fmt(i, "expected x,rho[,stderr]"));
            }
            values.push(f[1].trim().parse().map_err(|_| fmt(i, "bad rho"))?);
            stderr.push(match f.get(2) {
                Some(e) => e.trim().parse().map_err(|_| fmt(i, "bad stderr"))?,
                None => 0.0,
            });
        }
        let (t, lo, hi, out) = meta.ok_or_else(|| FracError::Format(format!("{}: missing header", path.display())))?;
        if values.is_empty() {
            return Err(FracError::Format(format!("{}: no bins", path.display())));
        }
        Ok(DensityField {
            lo,
            hi,
            values,
            stderr,
            t,
            out_of_window: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_particle_indicator() {
        let f = DensityField::from_samples([0.35], 1, 0.0, 1.0, 10, 0.0);
        assert_relative_eq!(f.values[3], 10.0);
        assert_eq!(f.values.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_relative_eq!(f.mass(), 1.0);
    }

    #[test]
    fn mass_accounting() {
        let xs = [0.1, 0.5, 2.0, 3.5, -0.0];
        let f = DensityField::from_samples(xs, 5, 0.0, 3.0, 6, 0.0);
        assert_relative_eq!(f.mass() + f.out_of_window, 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.out_of_window, 0.2);
    }

    #[test]
    fn stderr_scales_with_n() {
        let mut rng = RandomStream::new(3, 0);
        let mk = |n: usize, rng: &mut RandomStream| {
            let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            DensityField::from_samples(xs, n, 0.0, 1.0, 20, 0.0)
        };
        let a = mk(40_000, &mut rng);
        let b = mk(160_000, &mut rng);
        let ma: f64 = a.stderr.iter().sum::<f64>() / 20.0;
        let mb: f64 = b.stderr.iter().sum::<f64>() / 20.0;
        // quadrupling N halves the standard error
        assert!((ma / mb - 2.0).abs() < 0.2 * 2.0);
        let c = mk(80_000, &mut rng);
        let mc: f64 = c.stderr.iter().sum::<f64>() / 20.0;
        assert!((ma / mc - 2f64.sqrt()).abs() < 0.2 * 2f64.sqrt());
    }

    #[test]
    fn rebin_conserves_mass() {
        let f = DensityField::from_fn(|x| (-x).exp(), 0.0, 4.0, 40, 0.0);
        let g = f.rebin(0.0, 4.0, 16);
        assert_relative_eq!(f.mass(), g.mass(), max_relative = 1e-12);
        let h = f.rebin(0.0, 2.0, 7);
        assert_relative_eq!(h.mass() + h.out_of_window, f.mass() + f.out_of_window, max_relative = 1e-12);
    }

    #[test]
    fn csv_roundtrip() {
        let f = DensityField::from_fn(|x| x * x, 0.0, 2.0, 5, 0.25);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        f.write_csv(&p).unwrap();
        let g = DensityField::read_csv(&p).unwrap();
        assert_eq!(f.values, g.values);
        assert_eq!(g.t, 0.25);
        assert_eq!(g.hi, 2.0);
    }
}
