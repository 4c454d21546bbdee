//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use sgdecay_core::decay_character::{make_data, RadialProfile, V2Target};
use sgdecay_core::{Grid, SimParams, SpectralVectorField};

/// The default experiment box, `L = 32 pi`, at resolution `n`.
pub fn default_box(n: usize) -> Arc<Grid> {
    Grid::new(3, n, 32.0 * PI).expect("valid grid")
}

/// Small divergence-free data with an `r = 0` spectrum on `grid`.
pub fn small_data(grid: &Arc<Grid>) -> SpectralVectorField {
    let profile = RadialProfile::power_law(0.0, 3).with_cutoff(0.5, 0.25);
    make_data(&profile, grid, 7, Some(V2Target { norm: 1e-2, alpha: 1.0 })).expect("resolvable profile")
}

pub fn unit_params() -> SimParams {
    SimParams::new(1.0, 1.0).expect("positive constants")
}
