//! Spectral simulation and decay-rate verification for the second-grade
//! fluid system `d/dt (u - alpha Lap u) - mu Lap u + curl(u - alpha Lap u) x u + grad p = 0`.
//!
//! Modules, bottom-up:
//! - [`fields`]: periodic grids, transforms, Leray projection, norms, the nonlinear term.
//! - [`decay_character`]: decay indicators and characters of initial data.
//! - [`linear_continuum`] / [`linear_grid`]: the pseudo-parabolic linear flow on `R^n` and on the torus.
//! - [`solver`]: integrating-factor Runge-Kutta for the full system.
//! - [`harness`]: predicted exponents, log-log fits and verification reports.
//! - [`config`] / [`experiment`]: JSON experiment configs and artifact output.

pub mod config;
pub mod decay_character;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod harness;
pub mod linear_continuum;
pub mod linear_grid;
pub mod quadrature;
pub mod solver;

pub use decay_character::{
    DecayCharacterReport, EstimatorOptions, RadialProfile, SpectrumSamples, V2Target,
};
pub use error::{Error, Result};
pub use fields::{Grid, GridSpec, RealVectorField, SimParams, SpectralVectorField};
pub use harness::{FitResult, VerificationReport};
pub use linear_continuum::LinearDecayCurve;
pub use solver::{SolverConfig, TrajectoryRecord};
