//! Kinetic Monte Carlo and nonlocal-operator engine for the fractional
//! diffusion limit of the linear Boltzmann equation in the half-space.

pub mod error;
pub mod quad;
pub mod params;
pub mod rng;
pub mod equilibrium;
pub mod kernels;
pub mod geometry;
pub mod density;
pub mod kinetic;
pub mod testfn;
pub mod ops;
pub mod solver;

pub use kernels::KernelTable;
pub use equilibrium::{compute_c0, constants, make_default_equilibrium, Constants, Equilibrium, RadialProfile};
pub use error::{FracError, Result};
pub use params::ModelParams;
pub use rng::RandomStream;

/// Points and vectors; only the first `d` components are meaningful.
pub type Vec3 = [f64; 3];
