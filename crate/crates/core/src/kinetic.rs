//! Monte Carlo simulation of the rescaled linear Boltzmann equation in the
//! half-space with Maxwell wall interaction.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::density::DensityField;
use crate::equilibrium::Equilibrium;
use crate::error::{FracError, Result};
use crate::geometry::{HalfSpace, WallRule};
use crate::params::ModelParams;
use crate::rng::RandomStream;
use crate::Vec3;

const HIT_TAG: u64 = 0x6869_7473;
const HIT_WORDS: u128 = 32;
/// Velocity cut for the disequilibrium diagnostic.
pub const V_CUT: f64 = 50.0;

/// Initial density profile along the normal coordinate.
#[derive(Clone, Debug)]
pub enum InitialProfile {
    PointMass(f64),
    Uniform { lo: f64, hi: f64 },
    /// Gaussian restricted to x_d > 0 and renormalised.
    Gaussian { center: f64, sigma: f64 },
    Tabulated(DensityField),
}

impl InitialProfile {
    /// Normalised density at `x`; a point mass has no density.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            InitialProfile::PointMass(_) => f64::NAN,
            InitialProfile::Uniform { lo, hi } => {
                if x >= *lo && x < *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            InitialProfile::Gaussian { center, sigma } => {
                if x < 0.0 {
                    return 0.0;
                }
                let z = sigma * (2.0 * std::f64::consts::PI).sqrt() * 0.5 * erfc(-center / (sigma * std::f64::consts::SQRT_2));
                (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp() / z
            }
            InitialProfile::Tabulated(f) => f.value_at(x),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FracError::InvalidParams(m.to_string()));
        match self {
            InitialProfile::PointMass(x) if !(*x >= 0.0) => bad("point mass must sit in the closed half-space"),
            InitialProfile::Uniform { lo, hi } if !(*lo >= 0.0 && hi > lo) => bad("uniform profile needs 0 <= lo < hi"),
            InitialProfile::Gaussian { sigma, .. } if !(*sigma > 0.0) => bad("gaussian profile needs sigma > 0"),
            InitialProfile::Tabulated(f) if !(f.mass() > 0.0) => bad("initial density has zero mass"),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut RandomStream) -> f64 {
        match self {
            InitialProfile::PointMass(x) => *x,
            InitialProfile::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform(),
            InitialProfile::Gaussian { center, sigma } => loop {
                let x = center + sigma * rng.normal();
                if x > 0.0 {
                    break x;
                }
            },
            InitialProfile::Tabulated(f) => f.sample(rng),
        }
    }
}

/// One particle: position, law-F velocity, remaining flight time and the
/// counters addressing its random streams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    pub clock: f64,
    pub word: u128,
    pub hits: u64,
    pub scatters: u64,
}

/// Simulation options beyond the model parameters.
#[derive(Clone, Copy, Debug, Default)]
pub struct Scenario {
    /// Optional specular mirror at x_d = L that closes the domain; used for
    /// the stationarity check.
    pub far_mirror: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub particles: Vec<Particle>,
    pub t: f64,
    pub params: ModelParams,
    pub seed: u64,
    pub scenario: Scenario,
    eq: Equilibrium,
}

/// Draws N particles with positions from `profile` and velocities from F.
pub fn init_ensemble(
    profile: &InitialProfile,
    n: usize,
    params: ModelParams,
    eq: &Equilibrium,
    seed: u64,
) -> Result<ParticleEnsemble> {
    params.validate()?;
    if n == 0 {
        return Err(FracError::InvalidParams("particle count must be at least 1".into()));
    }
    profile.validate()?;
    let rate = collision_rate(&params);
    let k = params.d - 1;
    let particles = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(seed, i as u64);
            let mut x = [0.0; 3];
            x[k] = profile.sample(&mut rng);
            let v = eq.sample_velocity(&mut rng);
            let clock = rng.exponential() / rate;
            Particle {
                x,
                v,
                clock,
                word: rng.word_pos(),
                hits: 0,
                scatters: 0,
            }
        })
        .collect();
    Ok(ParticleEnsemble {
        particles,
        t: 0.0,
        params,
        seed,
        scenario: Scenario::default(),
        eq: eq.clone(),
    })
}

/// Scattering rate ν₀ε^{-2s} in macroscopic time.
pub fn collision_rate(p: &ModelParams) -> f64 {
    p.nu0 * p.eps.powf(-2.0 * p.s)
}

/// Which wall law a run applies; `Maxwell` is the production rule, the pure
/// variants exist to check pathwise coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WallLaw {
    Maxwell,
    PureSpecular,
    PureDiffuse,
}

impl ParticleEnsemble {
    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.eq
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Advances to `t_end`, returning the normal-coordinate positions at each
    /// snapshot time (row-major: particle, then snapshot).
    pub fn advance(&mut self, t_end: f64, snapshot_times: &[f64], law: WallLaw) -> Result<Vec<f64>> {
        if !(t_end >= self.t) {
            return Err(FracError::InvalidParams(format!("t_end={t_end} precedes current time {}", self.t)));
        }
        let mut times = snapshot_times.to_vec();
        if times.iter().any(|&s| s < self.t || s > t_end || !s.is_finite()) {
            return Err(FracError::InvalidParams("snapshot times must lie in [t, t_end]".into()));
        }
        times.sort_by(f64::total_cmp);
        if self.params.alpha > 0.0 || law == WallLaw::PureDiffuse {
            self.eq.c0()?;
        }
        let nsnap = times.len();
        let mut out = vec![0.0; self.particles.len() * nsnap.max(1)];
        let t0 = self.t;
        let ctx = Stepper {
            half: HalfSpace::new(self.params.d)?,
            eq: &self.eq,
            rate: collision_rate(&self.params),
            speed: self.params.eps.powf(1.0 - 2.0 * self.params.s),
            alpha: self.params.alpha,
            seed: self.seed,
            law,
            mirror: self.scenario.far_mirror,
        };
        let k = self.params.d - 1;
        self.particles
            .par_iter_mut()
            .zip(out.par_chunks_mut(nsnap.max(1)))
            .enumerate()
            .for_each(|(i, (p, slot))| {
                let mut now = t0;
                for (j, &ts) in times.iter().enumerate() {
                    ctx.step(i as u64, p, ts - now);
                    now = ts;
                    slot[j] = p.x[k];
                }
                ctx.step(i as u64, p, t_end - now);
            });
        self.t = t_end;
        if nsnap == 0 {
            out.clear();
        }
        Ok(out)
    }

    /// Runs to `t_end` with the Maxwell rule, returning one density per
    /// snapshot on the window `[lo, hi]` with `bins` bins.
    pub fn run(&mut self, t_end: f64, snapshot_times: &[f64], grid: &GridSpec) -> Result<Vec<DensityField>> {
        let pos = self.advance(t_end, snapshot_times, WallLaw::Maxwell)?;
        let mut sorted = snapshot_times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ns = sorted.len();
        let n = self.particles.len();
        Ok(sorted
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let col = (0..n).map(|i| pos[i * ns + j]);
                DensityField::from_samples(col, n, grid.lo, grid.hi, grid.bins, t)
            })
            .collect())
    }

    /// Histogram of the current positions.
    pub fn density(&self, grid: &GridSpec) -> DensityField {
        let k = self.params.d - 1;
        DensityField::from_samples(
            self.particles.iter().map(|p| p.x[k]),
            self.particles.len(),
            grid.lo,
            grid.hi,
            grid.bins,
            self.t,
        )
    }

    pub fn mean_scatterings(&self) -> f64 {
        self.particles.iter().map(|p| p.scatters as f64).sum::<f64>() / self.particles.len() as f64
    }

    /// Kolmogorov–Smirnov distance between the empirical law of |v| and the
    /// radial law of F.
    pub fn velocity_ks(&self) -> f64 {
        let d = self.params.d;
        let mut r: Vec<f64> = self
            .particles
            .iter()
            .map(|p| crate::equilibrium::norm(&p.v, d))
            .collect();
        ks_statistic(&mut r, |x| self.eq.radial_cdf(x))
    }

    /// χ²-type distance Σ (p̂_b − p_b)²/p_b between binned |v| frequencies and
    /// F, with |v| > V_CUT lumped into one bin.
    pub fn velocity_disequilibrium(&self) -> f64 {
        let d = self.params.d;
        let nb = 50;
        let edges: Vec<f64> = (0..=nb).map(|b| V_CUT * (b as f64 / nb as f64).powi(2)).collect();
        let mut counts = vec![0usize; nb + 1];
        for p in &self.particles {
            let r = crate::equilibrium::norm(&p.v, d);
            let b = if r >= V_CUT {
                nb
            } else {
                edges.partition_point(|&e| e <= r) - 1
            };
            counts[b] += 1;
        }
        let n = self.particles.len() as f64;
        let mut acc = 0.0;
        for b in 0..=nb {
            let pb = if b == nb {
                1.0 - self.eq.radial_cdf(V_CUT)
            } else {
                self.eq.radial_cdf(edges[b + 1]) - self.eq.radial_cdf(edges[b])
            };
            if pb > 0.0 {
                acc += (counts[b] as f64 / n - pb).powi(2) / pb;
            }
        }
        acc.sqrt()
    }
}

/// Kolmogorov–Smirnov statistic of `sample` against `cdf`; sorts in place.
pub fn ks_statistic<C: Fn(f64) -> f64>(sample: &mut [f64], cdf: C) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        dmax = dmax.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    dmax
}

/// Asymptotic one-sample KS critical value at level `level`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Histogram window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

struct Stepper<'a> {
    half: HalfSpace,
    eq: &'a Equilibrium,
    rate: f64,
    speed: f64,
    alpha: f64,
    seed: u64,
    law: WallLaw,
    mirror: Option<f64>,
}

impl Stepper<'_> {
    fn step(&self, idx: u64, p: &mut Particle, mut dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let mut main = RandomStream::new(self.seed, idx);
        main.set_word_pos(p.word);
        while p.clock <= dt {
            self.fly(idx, p, p.clock);
            dt -= p.clock;
            p.v = self.eq.sample_velocity(&mut main);
            p.scatters += 1;
            p.clock = main.exponential() / self.rate;
        }
        self.fly(idx, p, dt);
        p.clock -= dt;
        p.word = main.word_pos();
    }

    fn fly(&self, idx: u64, p: &mut Particle, dt: f64) {
        let k = self.half.d - 1;
        let n = self.half.outward_normal();
        let speed = self.speed;
        let mut vel = [p.v[0] * speed, p.v[1] * speed, p.v[2] * speed];
        let mut coin_rng = RandomStream::keyed(self.seed, HIT_TAG, idx, p.hits as u128 * HIT_WORDS);
        let eq = self.eq;
        let seed = self.seed;
        // hit h owns words [32h, 32h+32) of the wall stream: the Bernoulli
        // draw first, then the diffuse velocity
        let make_diffuse = |h: u64| {
            let mut r = RandomStream::keyed(seed, HIT_TAG, idx, h as u128 * HIT_WORDS + 2);
            let w = eq.sample_diffuse_velocity(&n, &mut r).expect("diffuse sampling requires s > 1/2");
            [w[0] * speed, w[1] * speed, w[2] * speed]
        };
        match self.mirror {
            None => {
                // at most one wall hit per flight in the half-space
                let slot = p.hits;
                let mut coin = || coin_rng.uniform();
                let mut diffuse = || make_diffuse(slot);
                let mut rule = match self.law {
                    WallLaw::PureSpecular => WallRule::Specular,
                    WallLaw::PureDiffuse => WallRule::Diffuse(&mut diffuse),
                    WallLaw::Maxwell => WallRule::Maxwell {
                        alpha: self.alpha,
                        coin: &mut coin,
                        diffuse: &mut diffuse,
                    },
                };
                let adv = self.half.advect_with_reflection(&p.x, &vel, dt, &mut rule);
                debug_assert!(adv.hits <= 1);
                p.hits += adv.hits as u64;
                p.x = adv.x;
                vel = adv.v;
            }
            Some(l) => {
                let mut left = dt;
                loop {
                    let t_near = if vel[k] < 0.0 { p.x[k] / -vel[k] } else { f64::INFINITY };
                    let t_far = if vel[k] > 0.0 { (l - p.x[k]) / vel[k] } else { f64::INFINITY };
                    let t = t_near.min(t_far);
                    if t >= left {
                        for i in 0..=k {
                            p.x[i] += left * vel[i];
                        }
                        p.x[k] = p.x[k].clamp(0.0, l);
                        break;
                    }
                    for i in 0..k {
                        p.x[i] += t * vel[i];
                    }
                    left -= t;
                    if t_near <= t_far {
                        p.x[k] = 0.0;
                        let h = p.hits;
                        p.hits += 1;
                        let diffuse = match self.law {
                            WallLaw::PureSpecular => false,
                            WallLaw::PureDiffuse => true,
                            WallLaw::Maxwell => {
                                coin_rng.set_word_pos(h as u128 * HIT_WORDS);
                                coin_rng.uniform() < self.alpha
                            }
                        };
                        vel = if diffuse { make_diffuse(h) } else { self.half.specular_reflect(&vel) };
                    } else {
                        p.x[k] = l;
                        vel[k] = -vel[k];
                    }
                }
            }
        }
        assert!(p.x[k] >= 0.0, "particle left the half-space");
        p.v = [vel[0] / speed, vel[1] / speed, vel[2] / speed];
    }
}
