//! Periodic-box spectral fields: grids, transforms, projections and norms.

mod field;
mod grid;
mod nonlinear;
pub mod norms;
pub mod snapshot;

pub use field::{HelmholtzDirection, RealVectorField, SpectralVectorField, SYMMETRY_TOLERANCE};
pub use grid::{Grid, GridSpec, SimParams};
pub use nonlinear::{
    lemma1_bound, lemma1_bound_check, nonlinear_term_spectral, LemmaBoundReport,
    DIVERGENCE_TOLERANCE, LEMMA_BOUND_SLACK,
};
pub(crate) use nonlinear::{lemma1_ratio, nonlinear_term_unchecked};
pub use norms::{
    norm_dm_h1alpha_sq, norm_grad_l2_sq, norm_h1alpha_sq, norm_l2_sq, norm_v2_sq,
    MAX_DERIVATIVE_ORDER,
};
