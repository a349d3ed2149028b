//! Time-averaged kernels F₁, F₀ and their tail gaps, with a memoised table.

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::equilibrium::{ball_volume, norm, sphere_area, Equilibrium};
use crate::error::{FracError, Result};
use crate::quad::{integrate, integrate_pieces, Tolerance};
use crate::Vec3;

/// Exponential truncation of the τ integrals, in units of 1/ν₀.
pub const TAU_TRUNCATION: f64 = 40.0;
pub const TABLE_NODES: usize = 2048;
pub const TABLE_MIN: f64 = 1e-4;
pub const TABLE_MAX: f64 = 1e4;

const KERNEL_TOL: Tolerance = Tolerance {
    abs: 0.0,
    rel: 1e-11,
    max_intervals: 4000,
};

fn breakpoints(r: f64, t_max: f64) -> Vec<f64> {
    let mut p = vec![0.0];
    for b in [r / 8.0, r, 8.0 * r] {
        if b < t_max {
            p.push(b);
        }
    }
    p.push(t_max);
    p
}

/// Weighted τ-average `∫ ν₀^k e^{−ν₀τ} τ^{−m} h(r/τ) dτ` with breakpoints
/// clustered around τ = r.
fn tau_average<H: Fn(f64) -> f64>(eq: &Equilibrium, r: f64, m: i32, k: i32, t_max: f64, h: H) -> Result<f64> {
    let nu = eq.params.nu0;
    let pref = nu.powi(k);
    let f = |tau: f64| {
        if tau <= 0.0 {
            return 0.0;
        }
        (-nu * tau).exp() * tau.powi(-m) * h(r / tau)
    };
    Ok(pref * integrate_pieces(f, &breakpoints(r, t_max), KERNEL_TOL)?.value)
}

fn gap_truncation(eq: &Equilibrium, r: f64) -> f64 {
    // the gap integrand decays like τ^{2s} e^{−ν₀τ} r^{-a} while the gap
    // itself is of order r^{-2a}, so the cut moves out with r
    (TAU_TRUNCATION + 2.0 * eq.params.tail_exponent() * r.max(1.0).ln()) / eq.params.nu0
}

/// F₁ at radius r by direct quadrature.
pub fn kernel_f1_radial(eq: &Equilibrium, r: f64) -> Result<f64> {
    check_radius(r)?;
    let t = TAU_TRUNCATION / eq.params.nu0;
    tau_average(eq, r, eq.d() as i32, 2, t, |u| eq.radial_pdf(u))
}

/// F₀ at radius r by direct quadrature.
pub fn kernel_f0_radial(eq: &Equilibrium, r: f64) -> Result<f64> {
    check_radius(r)?;
    let t = TAU_TRUNCATION / eq.params.nu0;
    tau_average(eq, r, eq.d() as i32 + 1, 1, t, |u| eq.radial_pdf(u))
}

/// `(G, G₀)` at radius r: G = F₁ − γ₁r^{-a}, G₀ = |F₀ − γ₀r^{-a}|, each
/// integrated from the gap of F so the leading tails cancel analytically.
pub fn tail_gap_radial(eq: &Equilibrium, r: f64) -> Result<(f64, f64)> {
    check_radius(r)?;
    let t = gap_truncation(eq, r);
    let g = tau_average(eq, r, eq.d() as i32, 2, t, |u| eq.radial_gap(u))?;
    let g0 = tau_average(eq, r, eq.d() as i32 + 1, 1, t, |u| eq.radial_gap(u))?;
    Ok((g, g0.abs()))
}

pub fn kernel_f1(eq: &Equilibrium, w: &Vec3) -> Result<f64> {
    kernel_f1_radial(eq, norm(w, eq.d()))
}

pub fn kernel_f0(eq: &Equilibrium, w: &Vec3) -> Result<f64> {
    kernel_f0_radial(eq, norm(w, eq.d()))
}

pub fn tail_gap(eq: &Equilibrium, w: &Vec3) -> Result<(f64, f64)> {
    tail_gap_radial(eq, norm(w, eq.d()))
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(FracError::InvalidParams(format!("kernel radius must be positive, got {r}")))
    }
}

/// Cubic Hermite interpolant on a uniform grid in ln r. Slopes come from
/// fourth-order differences, then Fritsch–Carlson limiting keeps monotone
/// data monotone.
#[derive(Clone, Debug)]
struct Column {
    y: Vec<f64>,
    m: Vec<f64>,
    log_mode: bool,
    sign: f64,
    power: f64,
}

impl Column {
    fn new(raw: &[f64], grid: &[f64], h: f64, power: f64) -> Column {
        let sign = if raw.iter().all(|&v| v > 0.0) {
            1.0
        } else if raw.iter().all(|&v| v < 0.0) {
            -1.0
        } else {
            0.0
        };
        let log_mode = sign != 0.0;
        let y: Vec<f64> = if log_mode {
            raw.iter().map(|v| (v * sign).ln()).collect()
        } else {
            raw.iter().zip(grid).map(|(v, r)| v * r.powf(power)).collect()
        };
        let n = y.len();
        let mut m = vec![0.0; n];
        for k in 0..n {
            m[k] = if k >= 2 && k + 2 < n {
                (-y[k + 2] + 8.0 * y[k + 1] - 8.0 * y[k - 1] + y[k - 2]) / (12.0 * h)
            } else if k == 0 {
                (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h)
            } else {
                (y[k + 1] - y[k - 1]) / (2.0 * h)
            };
        }
        for k in 0..n - 1 {
            let delta = (y[k + 1] - y[k]) / h;
            if delta == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            if m[k] * delta < 0.0 {
                m[k] = 0.0;
            }
            if m[k + 1] * delta < 0.0 {
                m[k + 1] = 0.0;
            }
            let a = m[k] / delta;
            let b = m[k + 1] / delta;
            let q = a * a + b * b;
            if q > 9.0 {
                let t = 3.0 / q.sqrt();
                m[k] = t * a * delta;
                m[k + 1] = t * b * delta;
            }
        }
        Column {
            y,
            m,
            log_mode,
            sign,
            power,
        }
    }

    fn eval(&self, k: usize, t: f64, h: f64, r: f64) -> f64 {
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1];
        if self.log_mode {
            self.sign * y.exp()
        } else {
            y * r.powf(-self.power)
        }
    }
}

/// Memoised F₁, F₀, G, G₀ on a log grid, plus tail masses of F₁ and the
/// one-sided flux tail of F₀.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub eq: Equilibrium,
    pub grid: Vec<f64>,
    pub f1: Vec<f64>,
    pub f0: Vec<f64>,
    pub g: Vec<f64>,
    pub g0: Vec<f64>,
    pub hash: String,
    pub truncation: f64,
    h: f64,
    cols: [Column; 4],
    f1_tail: Column,
    f0_flux_tail: Option<Column>,
    gamma0: f64,
    gamma1: f64,
}

/// Stable fingerprint of the sampled equilibrium and the parameters the
/// kernels depend on.
pub fn equilibrium_hash(eq: &Equilibrium) -> String {
    let mut h = Sha256::new();
    h.update((eq.d() as u64).to_le_bytes());
    h.update(eq.params.s.to_le_bytes());
    h.update(eq.params.nu0.to_le_bytes());
    for k in 0..=80 {
        let r = 10f64.powf(-4.0 + 0.1 * k as f64);
        h.update(eq.radial_pdf(r).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl KernelTable {
    pub fn build(eq: &Equilibrium) -> Result<KernelTable> {
        let n = TABLE_NODES;
        let lmin = TABLE_MIN.ln();
        let h = (TABLE_MAX.ln() - lmin) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|k| (lmin + h * k as f64).exp()).collect();
        let mut f1 = Vec::with_capacity(n);
        let mut f0 = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        let mut g0 = Vec::with_capacity(n);
        for &r in &grid {
            f1.push(kernel_f1_radial(eq, r)?);
            f0.push(kernel_f0_radial(eq, r)?);
            let (a, b) = tail_gap_radial(eq, r)?;
            g.push(a);
            g0.push(b);
        }
        KernelTable::from_columns(eq, grid, f1, f0, g, g0)
    }

    fn from_columns(eq: &Equilibrium, grid: Vec<f64>, f1: Vec<f64>, f0: Vec<f64>, g: Vec<f64>, g0: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if n < 8 || [f1.len(), f0.len(), g.len(), g0.len()].iter().any(|&l| l != n) {
            return Err(FracError::Format("kernel table columns have inconsistent lengths".into()));
        }
        let h = (grid[n - 1] / grid[0]).ln() / (n - 1) as f64;
        let a = eq.params.tail_exponent();
        let k = eq.constants();
        let cols = [
            Column::new(&f1, &grid, h, a),
            Column::new(&f0, &grid, h, a),
            Column::new(&g, &grid, h, 2.0 * a),
            Column::new(&g0, &grid, h, 2.0 * a),
        ];
        let mut table = KernelTable {
            eq: eq.clone(),
            hash: equilibrium_hash(eq),
            truncation: TAU_TRUNCATION / eq.params.nu0,
            h,
            cols,
            f1_tail: Column::new(&[1.0; 8], &grid[..8], h, 0.0),
            f0_flux_tail: None,
            gamma0: k.gamma0,
            gamma1: k.gamma1,
            grid,
            f1,
            f0,
            g,
            g0,
        };
        table.build_tails()?;
        Ok(table)
    }

    fn build_tails(&mut self) -> Result<()> {
        let d = self.eq.d();
        let s = self.eq.params.s;
        let n = self.grid.len();
        let rmax = self.grid[n - 1];
        let area = sphere_area(d);
        let a = self.eq.params.tail_exponent();
        let tol = Tolerance::new(0.0, 1e-12);
        // beyond the grid: exact power tail plus the fitted r^{-2a} gap tail
        let gap_tail = |gmax: f64, p: i32| gmax * rmax.powi(p + 1) / (2.0 * a - p as f64 - 1.0);
        let mut t1 = vec![0.0; n];
        t1[n - 1] = area * (self.gamma1 * rmax.powf(-2.0 * s) / (2.0 * s) + gap_tail(self.g[n - 1], d as i32 - 1));
        for k in (0..n - 1).rev() {
            let inc = integrate(|r: f64| r.powi(d as i32 - 1) * self.f1_interp(r), self.grid[k], self.grid[k + 1], tol)?.value;
            t1[k] = t1[k + 1] + area * inc;
        }
        self.f1_tail = Column::new(&t1, &self.grid, self.h, 0.0);
        if s > 0.5 {
            let bv = ball_volume(d - 1);
            let g0_signed = |k: usize| self.f0[k] - self.gamma0 * self.grid[k].powf(-a);
            let mut t0 = vec![0.0; n];
            t0[n - 1] = bv * (self.gamma0 * rmax.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0) + gap_tail(g0_signed(n - 1), d as i32));
            for k in (0..n - 1).rev() {
                let inc = integrate(|r: f64| r.powi(d as i32) * self.f0_interp(r), self.grid[k], self.grid[k + 1], tol)?.value;
                t0[k] = t0[k + 1] + bv * inc;
            }
            self.f0_flux_tail = Some(Column::new(&t0, &self.grid, self.h, 0.0));
        }
        Ok(())
    }

    fn locate(&self, r: f64) -> Option<(usize, f64)> {
        let n = self.grid.len();
        if !(r >= self.grid[0] && r <= self.grid[n - 1]) {
            return None;
        }
        let x = (r / self.grid[0]).ln() / self.h;
        let k = (x.floor() as usize).min(n - 2);
        Some((k, x - k as f64))
    }

    fn interp(&self, c: usize, r: f64) -> Option<f64> {
        self.locate(r).map(|(k, t)| self.cols[c].eval(k, t, self.h, r))
    }

    fn f1_interp(&self, r: f64) -> f64 {
        self.interp(0, r).unwrap()
    }

    fn f0_interp(&self, r: f64) -> f64 {
        self.interp(1, r).unwrap()
    }

    /// F₁ at radius r; direct quadrature outside the grid.
    pub fn f1(&self, r: f64) -> f64 {
        let r = r.abs();
        self.interp(0, r).unwrap_or_else(|| {
            kernel_f1_radial(&self.eq, r).unwrap_or_else(|_| self.gamma1 * r.powf(-self.eq.params.tail_exponent()))
        })
    }

    /// F₀ at radius r; direct quadrature outside the grid.
    pub fn f0(&self, r: f64) -> f64 {
        let r = r.abs();
        self.interp(1, r).unwrap_or_else(|| {
            kernel_f0_radial(&self.eq, r).unwrap_or_else(|_| self.gamma0 * r.powf(-self.eq.params.tail_exponent()))
        })
    }

    /// (G, G₀) at radius r.
    pub fn gaps(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        match (self.interp(2, r), self.interp(3, r)) {
            (Some(a), Some(b)) => (a, b),
            _ => tail_gap_radial(&self.eq, r).unwrap_or((0.0, 0.0)),
        }
    }

    /// ∫_{|w|>W} F₁(w) dw.
    pub fn f1_tail_mass(&self, big_w: f64) -> f64 {
        let d = self.eq.d();
        let s = self.eq.params.s;
        match self.locate(big_w) {
            Some((k, t)) => self.f1_tail.eval(k, t, self.h, big_w),
            None if big_w > self.grid[0] => {
                let (g, _) = self.gaps(big_w);
                let a = self.eq.params.tail_exponent();
                sphere_area(d)
                    * (self.gamma1 * big_w.powf(-2.0 * s) / (2.0 * s)
                        + g * big_w.powi(d as i32) / (2.0 * a - d as f64))
            }
            None => {
                let extra = integrate(|r: f64| r.powi(d as i32 - 1) * self.f1(r), big_w.max(0.0), self.grid[0], KERNEL_TOL)
                    .map(|e| e.value)
                    .unwrap_or(0.0);
                self.f1_tail.eval(0, 0.0, self.h, self.grid[0]) + sphere_area(d) * extra
            }
        }
    }

    /// ∫_{|w|>W, w·n<0} F₀(w)|w·n| dw, available when s > 1/2.
    pub fn f0_flux_tail(&self, big_w: f64) -> Option<f64> {
        let col = self.f0_flux_tail.as_ref()?;
        let d = self.eq.d();
        let s = self.eq.params.s;
        Some(match self.locate(big_w) {
            Some((k, t)) => col.eval(k, t, self.h, big_w),
            None if big_w > self.grid[0] => {
                ball_volume(d - 1) * self.gamma0 * big_w.powf(1.0 - 2.0 * s) / (2.0 * s - 1.0)
            }
            None => {
                let extra = integrate(|r: f64| r.powi(d as i32) * self.f0(r), big_w.max(0.0), self.grid[0], KERNEL_TOL)
                    .map(|e| e.value)
                    .unwrap_or(0.0);
                col.eval(0, 0.0, self.h, self.grid[0]) + ball_volume(d - 1) * extra
            }
        })
    }

    pub fn node_count(&self) -> usize {
        self.grid.len()
    }

    /// Cache file name for this equilibrium inside `dir`.
    pub fn cache_path(eq: &Equilibrium, dir: &Path) -> PathBuf {
        let hash = equilibrium_hash(eq);
        dir.join(format!(
            "kernels_d{}_s{}_nu{}_{}.csv",
            eq.d(),
            eq.params.s,
            eq.params.nu0,
            &hash[..16]
        ))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# fraclimit kernel table v1")?;
        writeln!(
            w,
            "# d={} s={} nu0={} hash={} truncation={}",
            self.eq.d(),
            self.eq.params.s,
            self.eq.params.nu0,
            self.hash,
            self.truncation
        )?;
        writeln!(w, "w,F1,F0,G,G0")?;
        for k in 0..self.grid.len() {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", self.grid[k], self.f1[k], self.f0[k], self.g[k], self.g0[k])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(eq: &Equilibrium, path: &Path) -> Result<KernelTable> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut cols: [Vec<f64>; 5] = Default::default();
        let mut hash_ok = false;
        let want = equilibrium_hash(eq);
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            if let Some(meta) = line.strip_prefix("# d=") {
                hash_ok = meta.split_whitespace().any(|kv| kv == format!("hash={want}"));
                continue;
            }
            if line.starts_with('#') || line.starts_with("w,") || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(FracError::Format(format!("{}:{}: expected 5 columns", path.display(), i + 1)));
            }
            for (c, f) in cols.iter_mut().zip(fields) {
                c.push(f.trim().parse().map_err(|_| {
                    FracError::Format(format!("{}:{}: bad number {f:?}", path.display(), i + 1))
                })?);
            }
        }
        if !hash_ok {
            return Err(FracError::Format(format!("{}: equilibrium hash mismatch", path.display())));
        }
        let [grid, f1, f0, g, g0] = cols;
        KernelTable::from_columns(eq, grid, f1, f0, g, g0)
    }

    /// Loads the cached table for `eq` from `dir`, building and writing it
    /// when absent or stale.
    pub fn load_or_build(eq: &Equilibrium, dir: &Path) -> Result<KernelTable> {
        let path = KernelTable::cache_path(eq, dir);
        if path.exists() {
            if let Ok(t) = KernelTable::read_csv(eq, &path) {
                return Ok(t);
            }
        }
        let t = KernelTable::build(eq)?;
        std::fs::create_dir_all(dir)?;
        t.write_csv(&path)?;
        Ok(t)
    }
}
