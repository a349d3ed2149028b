//! Nonlocal operators at the kinetic scale ε and in the limit, the
//! resolvent of the transport operator, and the convergence harness.

use std::sync::Arc;

use crate::equilibrium::{constants, Constants, Equilibrium};
use crate::error::{FracError, Result};
use crate::geometry::HalfSpace;
use crate::kernels::KernelTable;
use crate::quad::Tolerance;
use crate::testfn::{Profile, TestFunction};

pub mod convergence;
pub mod eps;
pub mod limit;
pub mod resolvent;

pub use convergence::{convergence_study, l2_grid, ConvergenceReport, ConvergenceRow, OperatorId};
pub use eps::{d2sm1_eps, kappa_eps, leps_diffuse, leps_extended, leps_sr, op_leps};
pub use limit::{flux_corrected, op_d2sm1, op_kappa_surface, op_kappa_volume, op_ld, op_lm, op_lsr, op_regional};
pub use resolvent::{resolvent_phi_eps, Bc};

pub(crate) const OP_TOL: Tolerance = Tolerance {
    abs: 1e-15,
    rel: 1e-11,
    max_intervals: 4000,
};

/// Everything the operators need: the equilibrium, its constants and, for
/// the ε-level operators, the kernel table.
#[derive(Clone, Debug)]
pub struct OpContext {
    pub eq: Equilibrium,
    pub k: Constants,
    pub half: HalfSpace,
    table: Option<Arc<KernelTable>>,
}

impl OpContext {
    /// Context with a freshly built kernel table.
    pub fn new(eq: &Equilibrium) -> Result<Self> {
        let t = KernelTable::build(eq)?;
        Ok(OpContext::with_table(eq, Arc::new(t)))
    }

    pub fn with_table(eq: &Equilibrium, table: Arc<KernelTable>) -> Self {
        OpContext {
            k: constants(&eq.params, eq),
            half: HalfSpace { d: eq.d() },
            eq: eq.clone(),
            table: Some(table),
        }
    }

    /// Context for the limit operators only.
    pub fn limit_only(eq: &Equilibrium) -> Self {
        OpContext {
            k: constants(&eq.params, eq),
            half: HalfSpace { d: eq.d() },
            eq: eq.clone(),
            table: None,
        }
    }

    pub fn table(&self) -> Result<&KernelTable> {
        self.table
            .as_deref()
            .ok_or_else(|| FracError::InvalidParams("operator context was built without a kernel table".into()))
    }

    pub fn d(&self) -> usize {
        self.eq.d()
    }

    pub fn s(&self) -> f64 {
        self.eq.params.s
    }

    pub(crate) fn require_1d(&self, what: &str) -> Result<()> {
        if self.d() == 1 {
            Ok(())
        } else {
            Err(FracError::Unsupported(format!("{what} is implemented for d = 1 only (got d = {})", self.d())))
        }
    }
}

/// Applies a linear operator term by term: constants map to `on_const`,
/// sums are expanded, everything else goes to `f`.
pub(crate) fn linear<F>(psi: &TestFunction, on_const: &dyn Fn(f64) -> Result<f64>, f: &F) -> Result<f64>
where
    F: Fn(&TestFunction) -> Result<f64>,
{
    match &psi.profile {
        Profile::Const(c) => on_const(*c),
        Profile::Sum(terms) => {
            let mut acc = 0.0;
            for (c, p) in terms {
                let mut t = psi.clone();
                t.support_radius = p.reach();
                t.profile = p.clone();
                acc += c * linear(&t, on_const, f)?;
            }
            Ok(acc)
        }
        _ => {
            if !psi.support_radius.is_finite() {
                return Err(FracError::InvalidParams(format!(
                    "test function {} does not decay; the nonlocal operator diverges",
                    psi.id
                )));
            }
            f(psi)
        }
    }
}

pub(crate) fn zero(_: f64) -> Result<f64> {
    Ok(0.0)
}

/// Sorted, deduplicated breakpoints inside `(lo, hi)` plus the endpoints.
pub(crate) fn breaks(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut p: Vec<f64> = extra.into_iter().filter(|&b| b > lo && b < hi && b.is_finite()).collect();
    p.push(lo);
    p.push(hi);
    p.sort_by(f64::total_cmp);
    p.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    p
}
