//! Shared fixtures for the criterion benches.

pub use fraclimit_core as core;
