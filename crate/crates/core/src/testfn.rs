//! Smooth test functions on the closed half-space with analytic derivatives.

use crate::Vec3;

/// Profile along the normal coordinate.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Const(f64),
    /// `exp(−(x−c)²/2σ²)`
    Gaussian { center: f64, sigma: f64 },
    /// `g(x−c) + g(x+c)`, even about the wall.
    Mirrored { center: f64, sigma: f64 },
    /// `(1 + a x²) exp(−x²/2σ²)`
    EvenGaussian { a: f64, sigma: f64 },
    /// `x exp(−x)`
    XExp,
    /// `x^k`
    Monomial(u32),
    /// Linear combination.
    Sum(Vec<(f64, Profile)>),
}

fn gauss(x: f64, c: f64, s: f64) -> [f64; 3] {
    let z = (x - c) / s;
    let g = (-0.5 * z * z).exp();
    [g, -z / s * g, (z * z - 1.0) / (s * s) * g]
}

impl Profile {
    /// Value, first and second derivative at `x`.
    pub fn jet(&self, x: f64) -> [f64; 3] {
        match self {
            Profile::Const(c) => [*c, 0.0, 0.0],
            Profile::Gaussian { center, sigma } => gauss(x, *center, *sigma),
            Profile::Mirrored { center, sigma } => {
                let a = gauss(x, *center, *sigma);
                let b = gauss(x, -*center, *sigma);
                [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
            }
            Profile::EvenGaussian { a, sigma } => {
                let g = gauss(x, 0.0, *sigma);
                let p = 1.0 + a * x * x;
                [p * g[0], 2.0 * a * x * g[0] + p * g[1], 2.0 * a * g[0] + 4.0 * a * x * g[1] + p * g[2]]
            }
            Profile::XExp => {
                let e = (-x).exp();
                [x * e, (1.0 - x) * e, (x - 2.0) * e]
            }
            Profile::Monomial(k) => {
                let k = *k as i32;
                let kf = k as f64;
                [
                    x.powi(k),
                    if k >= 1 { kf * x.powi(k - 1) } else { 0.0 },
                    if k >= 2 { kf * (kf - 1.0) * x.powi(k - 2) } else { 0.0 },
                ]
            }
            Profile::Sum(terms) => {
                let mut out = [0.0; 3];
                for (c, p) in terms {
                    let j = p.jet(x);
                    for i in 0..3 {
                        out[i] += c * j[i];
                    }
                }
                out
            }
        }
    }

    /// Distance beyond which the profile is below 1e-17 of its scale, or a
    /// generous cut for slowly decaying profiles.
    pub fn reach(&self) -> f64 {
        match self {
            Profile::Const(_) | Profile::Monomial(_) => f64::INFINITY,
            Profile::Gaussian { center, sigma } | Profile::Mirrored { center, sigma } => center.abs() + 9.0 * sigma,
            Profile::EvenGaussian { sigma, .. } => 10.0 * sigma,
            Profile::XExp => 45.0,
            Profile::Sum(t) => t.iter().map(|(_, p)| p.reach()).fold(0.0, f64::max),
        }
    }

    /// Whether the normal derivative vanishes at the wall by construction.
    pub fn even_at_wall(&self) -> bool {
        match self {
            Profile::Const(_) | Profile::Mirrored { .. } | Profile::EvenGaussian { .. } => true,
            Profile::Gaussian { center, .. } => *center == 0.0,
            Profile::Monomial(k) => *k != 1,
            Profile::XExp => false,
            Profile::Sum(t) => t.iter().all(|(_, p)| p.even_at_wall()),
        }
    }

    /// Smallest features, used to place quadrature breakpoints.
    pub fn features(&self) -> Vec<f64> {
        match self {
            Profile::Gaussian { center, sigma } | Profile::Mirrored { center, sigma } => {
                vec![center - 3.0 * sigma, *center, center + 3.0 * sigma]
            }
            Profile::EvenGaussian { sigma, .. } => vec![*sigma, 3.0 * sigma],
            Profile::XExp => vec![1.0, 5.0],
            Profile::Sum(t) => t.iter().flat_map(|(_, p)| p.features()).collect(),
            _ => vec![],
        }
    }
}

/// Scalar field `ψ(x) = q(x_d) · Π_{i<d} exp(−x_i²/2σ_t²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub profile: Profile,
    /// Width of the tangential Gaussian factor (d ≥ 2); `None` means ψ does
    /// not depend on x'.
    pub tangential: Option<f64>,
    pub in_ds_class: bool,
    /// Order of vanishing of ∂_dψ at the wall (0 if it does not vanish).
    pub dn_zero_order: u32,
    pub support_radius: f64,
}

impl TestFunction {
    pub fn new(id: &str, profile: Profile) -> Self {
        let even = profile.even_at_wall();
        TestFunction {
            id: id.to_string(),
            support_radius: profile.reach(),
            in_ds_class: even,
            dn_zero_order: if even { 1 } else { 0 },
            tangential: None,
            profile,
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::new("const", Profile::Const(c))
    }

    pub fn with_tangential(mut self, sigma: f64) -> Self {
        self.tangential = Some(sigma);
        self
    }

    /// Value of the normal profile.
    pub fn q(&self, x: f64) -> f64 {
        self.profile.jet(x)[0]
    }

    /// Even extension of the normal profile, q(|y|).
    pub fn q_ext(&self, y: f64) -> f64 {
        self.profile.jet(y.abs())[0]
    }

    pub fn q_jet(&self, x: f64) -> [f64; 3] {
        self.profile.jet(x)
    }

    pub fn value(&self, x: &Vec3, d: usize) -> f64 {
        self.q(x[d - 1]) * self.tangential_factor(x, d)[0]
    }

    /// Value of the even extension ψ(x', |x_d|).
    pub fn value_ext(&self, x: &Vec3, d: usize) -> f64 {
        self.q_ext(x[d - 1]) * self.tangential_factor(x, d)[0]
    }

    fn tangential_factor(&self, x: &Vec3, d: usize) -> [f64; 3] {
        // returns p, and the per-axis logarithmic derivative factor −x_i/σ²
        match self.tangential {
            None => [1.0, 0.0, 0.0],
            Some(s) => {
                let r2: f64 = x[..d - 1].iter().map(|v| v * v).sum();
                [(-0.5 * r2 / (s * s)).exp(), 1.0 / (s * s), 0.0]
            }
        }
    }

    pub fn gradient(&self, x: &Vec3, d: usize) -> Vec3 {
        let k = d - 1;
        let j = self.q_jet(x[k]);
        let [p, inv_s2, _] = self.tangential_factor(x, d);
        let mut g = [0.0; 3];
        for i in 0..k {
            g[i] = -x[i] * inv_s2 * p * j[0];
        }
        g[k] = p * j[1];
        g
    }

    pub fn hessian(&self, x: &Vec3, d: usize) -> [[f64; 3]; 3] {
        let k = d - 1;
        let j = self.q_jet(x[k]);
        let [p, c, _] = self.tangential_factor(x, d);
        let mut h = [[0.0; 3]; 3];
        for a in 0..k {
            for b in 0..k {
                let delta = if a == b { 1.0 } else { 0.0 };
                h[a][b] = p * j[0] * (x[a] * x[b] * c * c - delta * c);
            }
            h[a][k] = -x[a] * c * p * j[1];
            h[k][a] = h[a][k];
        }
        h[k][k] = p * j[2];
        h
    }

    /// Linear combination `a·self + b·other` of two x'-independent functions.
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64, id: &str) -> TestFunction {
        let mut t = TestFunction::new(id, Profile::Sum(vec![(a, self.profile.clone()), (b, other.profile.clone())]));
        t.tangential = self.tangential;
        t
    }
}

/// Gaussian bump at `center` with width `sigma`.
pub fn gaussian_bump(center: f64, sigma: f64) -> TestFunction {
    TestFunction::new(&format!("bump_c{center}_s{sigma}"), Profile::Gaussian { center, sigma })
}

/// Functions in the even-at-the-wall class used by the convergence studies.
pub fn ds_family() -> Vec<TestFunction> {
    vec![
        TestFunction::new("mirrored_c1.5_s0.5", Profile::Mirrored { center: 1.5, sigma: 0.5 }),
        TestFunction::new("even_a1_s0.8", Profile::EvenGaussian { a: 1.0, sigma: 0.8 }),
        TestFunction::new("mirrored_c3_s0.7", Profile::Mirrored { center: 3.0, sigma: 0.7 }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all() -> Vec<TestFunction> {
        let mut v = ds_family();
        v.push(gaussian_bump(2.0, 0.5));
        v.push(TestFunction::new("xexp", Profile::XExp));
        v.push(TestFunction::new("x2", Profile::Monomial(2)));
        v.push(gaussian_bump(1.0, 0.6).with_tangential(1.3));
        v
    }

    #[test]
    fn class_flags() {
        for f in ds_family() {
            assert!(f.in_ds_class);
            assert_eq!(f.q_jet(0.0)[1], 0.0);
        }
        assert!(!gaussian_bump(2.0, 0.5).in_ds_class);
        assert!(!TestFunction::new("xexp", Profile::XExp).in_ds_class);
    }

    proptest! {
        #[test]
        fn derivatives_match_differences(x0 in 0.05..6.0f64, x1 in -2.0..2.0f64, which in 0usize..7) {
            let f = &all()[which];
            let d = if f.tangential.is_some() { 2 } else { 1 };
            let x = if d == 2 { [x1, x0, 0.0] } else { [x0, 0.0, 0.0] };
            let h = 1e-5;
            let g = f.gradient(&x, d);
            let hs = f.hessian(&x, d);
            for i in 0..d {
                let mut xp = x; xp[i] += h;
                let mut xm = x; xm[i] -= h;
                let fd = (f.value(&xp, d) - f.value(&xm, d)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
                let gp = f.gradient(&xp, d);
                let gm = f.gradient(&xm, d);
                for j in 0..d {
                    let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                    prop_assert!((fd2 - hs[i][j]).abs() <= 1e-6 * (1.0 + hs[i][j].abs()));
                }
            }
        }
    }
}
