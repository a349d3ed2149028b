//! Exact geometry of the half-space {x_d > 0}.

use crate::error::{FracError, Result};
use crate::Vec3;

/// The half-space ℝ^d_+ with outward normal −e_d.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfSpace {
    pub d: usize,
}

/// Forward exit time and point of a straight ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitRecord {
    pub tau_f: f64,
    pub x_f: Option<Vec3>,
}

/// Boundary rule applied when a flight reaches the wall.
pub enum WallRule<'a> {
    Specular,
    /// Draws an outgoing velocity (with positive normal component).
    Diffuse(&'a mut dyn FnMut() -> Vec3),
    /// Diffuse with probability α, else specular. `coin` returns a uniform
    /// draw for the Bernoulli choice.
    Maxwell {
        alpha: f64,
        coin: &'a mut dyn FnMut() -> f64,
        diffuse: &'a mut dyn FnMut() -> Vec3,
    },
}

/// End state of [`HalfSpace::advect_with_reflection`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Advected {
    pub x: Vec3,
    pub v: Vec3,
    pub hits: u32,
    pub diffuse_hits: u32,
}

impl HalfSpace {
    pub fn new(d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(FracError::InvalidParams(format!("dimension {d} not in 1..=3")));
        }
        Ok(HalfSpace { d })
    }

    pub fn normal_index(&self) -> usize {
        self.d - 1
    }

    pub fn outward_normal(&self) -> Vec3 {
        let mut n = [0.0; 3];
        n[self.d - 1] = -1.0;
        n
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        x[self.d - 1] > 0.0
    }

    /// τ_f = x_d / (−v_d) when v_d < 0, else +∞.
    pub fn exit(&self, x: &Vec3, v: &Vec3) -> Result<ExitRecord> {
        let k = self.d - 1;
        if x[k] < 0.0 {
            return Err(FracError::InvalidParams(format!("point {x:?} lies outside the half-space")));
        }
        if x[k] == 0.0 && v[k] == 0.0 {
            return Err(FracError::InvalidParams("grazing ray on the boundary".into()));
        }
        if v[k] >= 0.0 {
            return Ok(ExitRecord {
                tau_f: f64::INFINITY,
                x_f: None,
            });
        }
        let tau = x[k] / -v[k];
        let mut xf = [0.0; 3];
        for i in 0..k {
            xf[i] = x[i] + tau * v[i];
        }
        Ok(ExitRecord {
            tau_f: tau,
            x_f: Some(xf),
        })
    }

    /// τ_f^ε(x, v) = τ_f(x, εv).
    pub fn exit_scaled(&self, x: &Vec3, v: &Vec3, eps: f64) -> Result<ExitRecord> {
        self.exit(x, &[eps * v[0], eps * v[1], eps * v[2]])
    }

    pub fn specular_reflect(&self, v: &Vec3) -> Vec3 {
        let mut r = *v;
        r[self.d - 1] = -r[self.d - 1];
        r
    }

    /// Mirror-reflected endpoint of the displacement `w` from `x`.
    pub fn eta(&self, x: &Vec3, w: &Vec3) -> Vec3 {
        let mut y = [0.0; 3];
        for i in 0..self.d {
            y[i] = x[i] + w[i];
        }
        let k = self.d - 1;
        y[k] = y[k].abs();
        y
    }

    /// Straight-line motion for `duration` with the wall rule applied at each
    /// crossing. After a diffuse draw the remaining time is spent along the
    /// new velocity.
    pub fn advect_with_reflection(&self, x: &Vec3, v: &Vec3, duration: f64, rule: &mut WallRule) -> Advected {
        let k = self.d - 1;
        let mut x = *x;
        let mut v = *v;
        let mut left = duration;
        let mut hits = 0;
        let mut diffuse_hits = 0;
        loop {
            if left <= 0.0 {
                break;
            }
            let tau = if v[k] < 0.0 { x[k] / -v[k] } else { f64::INFINITY };
            if tau >= left {
                for i in 0..self.d {
                    x[i] += left * v[i];
                }
                break;
            }
            for i in 0..k {
                x[i] += tau * v[i];
            }
            x[k] = 0.0;
            left -= tau;
            hits += 1;
            let diffuse = match rule {
                WallRule::Specular => false,
                WallRule::Diffuse(_) => true,
                WallRule::Maxwell { alpha, coin, .. } => coin() < *alpha,
            };
            if diffuse {
                diffuse_hits += 1;
                v = match rule {
                    WallRule::Diffuse(f) => f(),
                    WallRule::Maxwell { diffuse, .. } => diffuse(),
                    WallRule::Specular => unreachable!(),
                };
            } else {
                v[k] = -v[k];
            }
        }
        debug_assert!(x[k] >= 0.0);
        Advected {
            x,
            v,
            hits,
            diffuse_hits,
        }
    }
}
