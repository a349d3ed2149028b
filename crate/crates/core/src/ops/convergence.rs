//! Grid-L² distances between ε-scale operators and their limits.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eps::{d2sm1_eps, kappa_eps, leps_diffuse, leps_sr, op_leps};
use super::limit::{op_kappa_surface, op_lm, op_lsr, op_regional};
use super::resolvent::{diffuse_wall_value, phi_with_wall, Bc};
use super::OpContext;
use crate::error::{FracError, Result};
use crate::quad::{integrate_power_tail, Tolerance};
use crate::testfn::TestFunction;

/// Number of points of the evaluation grid on (0, 8].
pub const GRID_POINTS: usize = 400;
pub const GRID_END: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorId {
    /// L^ε against L_SR.
    Lsr,
    /// L_ε against −γ_{d,s}(−Δ)^s_Ω.
    Leps,
    /// κ_ε against κ.
    Kappa,
    /// ε-level L_M against L_M, with α from the parameters.
    Lm,
    /// φ_ε against ψ in L²_F(Ω × ℝ).
    Phi,
    /// ε⁻¹|𝒟^{2s−1}_ε[ψ]|² at the wall (not a difference).
    BoundaryFlux,
}

impl OperatorId {
    pub const ALL: [OperatorId; 6] = [
        OperatorId::Lsr,
        OperatorId::Leps,
        OperatorId::Kappa,
        OperatorId::Lm,
        OperatorId::Phi,
        OperatorId::BoundaryFlux,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorId::Lsr => "Lsr",
            OperatorId::Leps => "Leps",
            OperatorId::Kappa => "kappa",
            OperatorId::Lm => "LM",
            OperatorId::Phi => "phi",
            OperatorId::BoundaryFlux => "boundary_flux",
        }
    }

    pub fn parse(s: &str) -> Option<OperatorId> {
        OperatorId::ALL.into_iter().find(|o| o.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub operator: OperatorId,
    pub psi_id: String,
    pub l2_error: f64,
    /// log(e_prev/e)/log(ε_prev/ε); absent for the first ε.
    pub order_estimate: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

/// Verdict on one (operator, ψ) error sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesCheck {
    pub operator: OperatorId,
    pub psi_id: String,
    pub errors: Vec<f64>,
    pub worst_ratio: f64,
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn series(&self, op: OperatorId, psi_id: &str) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.operator == op && r.psi_id == psi_id).collect()
    }

    /// Every sequence checked for strict decrease with consecutive ratio at
    /// most `max_ratio`. Sequences that are identically zero pass.
    pub fn checks(&self, max_ratio: f64) -> Vec<SeriesCheck> {
        let mut keys: Vec<(OperatorId, String)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(o, p)| *o == r.operator && *p == r.psi_id) {
                keys.push((r.operator, r.psi_id.clone()));
            }
        }
        keys.into_iter()
            .map(|(op, id)| {
                let errors: Vec<f64> = self.series(op, &id).iter().map(|r| r.l2_error).collect();
                let zero = errors.iter().all(|&e| e == 0.0);
                let worst = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
                let monotone = zero || errors.windows(2).all(|w| w[1] < w[0] && w[1] <= max_ratio * w[0]);
                SeriesCheck {
                    operator: op,
                    psi_id: id,
                    errors,
                    worst_ratio: if zero { 0.0 } else { worst },
                    monotone,
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "epsilon,operator,psi_id,l2_error,order_estimate")?;
        for r in &self.rows {
            let order = r.order_estimate.map(|o| format!("{o:.6}")).unwrap_or_default();
            writeln!(w, "{},{},{},{:e},{}", r.epsilon, r.operator, r.psi_id, r.l2_error, order)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table with one verdict per sequence.
    pub fn summary(&self, max_ratio: f64) -> String {
        let mut out = String::new();
        for c in self.checks(max_ratio) {
            let errs: Vec<String> = c.errors.iter().map(|e| format!("{e:.3e}")).collect();
            out.push_str(&format!(
                "{:<14} {:<22} [{}] worst ratio {:.3} {}\n",
                c.operator.name(),
                c.psi_id,
                errs.join(", "),
                c.worst_ratio,
                if c.monotone { "ok" } else { "NOT MONOTONE" }
            ));
        }
        out
    }
}

/// Evaluation grid x_i = 8i/400, i = 1..400, and its uniform weight.
pub fn l2_grid() -> (Vec<f64>, f64) {
    let h = GRID_END / GRID_POINTS as f64;
    ((1..=GRID_POINTS).map(|i| i as f64 * h).collect(), h)
}

fn grid_eval<F: Fn(f64) -> Result<f64> + Sync>(xs: &[f64], f: F) -> Result<Vec<f64>> {
    xs.par_iter().map(|&x| f(x)).collect()
}

fn l2_distance(a: &[f64], b: &[f64], h: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * h).sqrt()
}

/// ∫|φ_ε(x,v) − ψ(x)|²F(v) dv at one x.
fn phi_defect(psi: &TestFunction, x: f64, ctx: &OpContext, eps: f64, alpha: f64, wall: Option<f64>) -> Result<f64> {
    let nu0 = ctx.eq.params.nu0;
    let q = psi.q(x);
    let tol = Tolerance::new(1e-16, 1e-9);
    let r_max = 1e4 * (1.0 + (x + psi.support_radius.min(100.0)) / eps);
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let mut err = None;
        let f = |r: f64| match phi_with_wall(psi, x, sign * r, nu0, eps, alpha, wall) {
            Ok(phi) => (phi - q).powi(2) * ctx.eq.radial_pdf(r),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let part = integrate_power_tail(f, 1e-9, r_max, 2.0 * ctx.s(), tol)?.value;
        if let Some(e) = err {
            return Err(e);
        }
        total += part;
    }
    Ok(total)
}

/// Runs every (operator, ψ, ε) combination on the standard grid. The wall
/// law for `Lm` and `Phi` follows `ctx.eq.params.alpha`.
pub fn convergence_study(
    psis: &[TestFunction],
    eps_list: &[f64],
    ops: &[OperatorId],
    ctx: &OpContext,
) -> Result<ConvergenceReport> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FracError::InvalidParams("the eps list must be strictly decreasing".into()));
    }
    let (xs, h) = l2_grid();
    let alpha = ctx.eq.params.alpha;
    let bc = Bc::from_alpha(alpha);
    let g_ds = ctx.k.gamma_ds;
    let mut report = ConvergenceReport::default();
    for psi in psis {
        for &op in ops {
            let limit: Option<Vec<f64>> = match op {
                OperatorId::Lsr => Some(grid_eval(&xs, |x| op_lsr(psi, &[x, 0.0, 0.0], ctx))?),
                OperatorId::Leps => Some(grid_eval(&xs, |x| Ok(-g_ds * op_regional(psi, &[x, 0.0, 0.0], ctx)?))?),
                OperatorId::Kappa => Some(grid_eval(&xs, |x| op_kappa_surface(psi, &[x, 0.0, 0.0], ctx))?),
                OperatorId::Lm => Some(grid_eval(&xs, |x| op_lm(psi, &[x, 0.0, 0.0], ctx, alpha))?),
                OperatorId::Phi | OperatorId::BoundaryFlux => None,
            };
            let mut prev: Option<(f64, f64)> = None;
            for &eps in eps_list {
                let p = |x: f64| [x, 0.0, 0.0];
                let err = match op {
                    OperatorId::Lsr => l2_distance(&grid_eval(&xs, |x| leps_sr(psi, &p(x), ctx, eps))?, limit.as_ref().unwrap(), h),
                    OperatorId::Leps => {
                        l2_distance(&grid_eval(&xs, |x| leps_diffuse(psi, &p(x), ctx, eps))?, limit.as_ref().unwrap(), h)
                    }
                    OperatorId::Kappa => {
                        l2_distance(&grid_eval(&xs, |x| kappa_eps(psi, &p(x), ctx, eps))?, limit.as_ref().unwrap(), h)
                    }
                    OperatorId::Lm => {
                        l2_distance(&grid_eval(&xs, |x| op_leps(psi, &p(x), ctx, eps, bc))?, limit.as_ref().unwrap(), h)
                    }
                    OperatorId::Phi => {
                        let wall = if alpha > 0.0 { Some(diffuse_wall_value(psi, ctx, eps)?) } else { None };
                        let d = grid_eval(&xs, |x| phi_defect(psi, x, ctx, eps, alpha, wall))?;
                        (d.iter().sum::<f64>() * h).sqrt()
                    }
                    OperatorId::BoundaryFlux => {
                        let f = d2sm1_eps(psi, &[0.0; 3], ctx, eps)?;
                        f * f / eps
                    }
                };
                let order = prev.and_then(|(pe, perr)| {
                    (perr > 0.0 && err > 0.0).then(|| (perr / err).ln() / (pe / eps).ln())
                });
                report.rows.push(ConvergenceRow {
                    epsilon: eps,
                    operator: op,
                    psi_id: psi.id.clone(),
                    l2_error: err,
                    order_estimate: order,
                });
                prev = Some((eps, err));
            }
        }
    }
    Ok(report)
}
