use serde::{Deserialize, Serialize};

use crate::error::{FracError, Result};

/// Physical and scaling constants shared by every part of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension, 1 to 3.
    pub d: usize,
    /// Tail exponent in (0, 1).
    pub s: f64,
    /// Collision frequency.
    pub nu0: f64,
    /// Tail constant of the equilibrium. `None` uses the unit-scale default
    /// family and reports whatever constant it implies.
    pub gamma: Option<f64>,
    /// Accommodation coefficient, 0 = specular, 1 = diffuse.
    pub alpha: f64,
    /// Knudsen number.
    pub eps: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            d: 1,
            s: 0.75,
            nu0: 1.0,
            gamma: None,
            alpha: 0.0,
            eps: 0.1,
        }
    }
}

impl ModelParams {
    pub fn new(d: usize, s: f64, nu0: f64, alpha: f64, eps: f64) -> Result<Self> {
        let p = ModelParams {
            d,
            s,
            nu0,
            gamma: None,
            alpha,
            eps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FracError::InvalidParams(m));
        if !(1..=3).contains(&self.d) {
            return bad(format!("dimension d={} must be 1, 2 or 3", self.d));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("tail exponent s={} must lie in (0,1)", self.s));
        }
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return bad(format!("collision frequency nu0={} must be positive", self.nu0));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("tail constant gamma={g} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("accommodation alpha={} must lie in [0,1]", self.alpha));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("Knudsen number eps={} must lie in (0,1]", self.eps));
        }
        if self.alpha > 0.0 && self.s <= 0.5 {
            return bad(format!(
                "diffuse reflection (alpha={} > 0) needs s > 1/2 so that the wall flux \
                 normalisation c0 is finite; got s={}",
                self.alpha, self.s
            ));
        }
        Ok(())
    }

    /// `d + 2s`, the decay exponent of the equilibrium tail.
    pub fn tail_exponent(&self) -> f64 {
        self.d as f64 + 2.0 * self.s
    }
}
