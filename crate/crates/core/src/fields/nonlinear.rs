use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{HelmholtzDirection, RealVectorField, SpectralVectorField};
use super::grid::SimParams;
use super::norms::{norm_grad_l2_sq, norm_l2_sq};
use crate::error::{Error, Result};

/// Relative divergence defect tolerated on input to the nonlinear term.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

/// Slack on the pointwise Fourier bound of the nonlinear term.
pub const LEMMA_BOUND_SLACK: f64 = 1e-6;

/// Pseudo-spectral evaluation of `G = -F{ curl(u - alpha Lap u) x u }`.
///
/// The weighted curl is formed in frequency space over the full retained
/// band, the cross product is taken pointwise on the grid, and the result is
/// transformed back and truncated to the two-thirds band. The zero mode is
/// set to zero. With `projected`, the Leray projection is applied last.
pub fn nonlinear_term_spectral(
    uh: &SpectralVectorField,
    params: &SimParams,
    projected: bool,
) -> Result<SpectralVectorField> {
    if uh.dim() != 3 {
        return Err(Error::UnsupportedDimension(uh.dim()));
    }
    uh.require_divergence_free(DIVERGENCE_TOLERANCE)?;
    Ok(nonlinear_term_unchecked(uh, params, projected))
}

pub(crate) fn nonlinear_term_unchecked(
    uh: &SpectralVectorField,
    params: &SimParams,
    projected: bool,
) -> SpectralVectorField {
    let q_hat = uh
        .helmholtz_weight(params.alpha, HelmholtzDirection::Forward)
        .curl()
        .expect("dimension checked by caller");
    let q = q_hat.to_real_unchecked();
    let u = uh.to_real_unchecked();
    let product = pointwise_cross(&q, &u, -1.0);
    let mut g = product.to_spectral();
    g.dealias();
    g.zero_mean();
    if projected {
        g.leray_project()
    } else {
        g
    }
}

/// `s * (a x b)` evaluated at every grid point.
pub(crate) fn pointwise_cross(a: &RealVectorField, b: &RealVectorField, s: f64) -> RealVectorField {
    let grid = a.grid().clone();
    let (a, b) = (a.components(), b.components());
    let len = a[0].len();
    let mut out = vec![vec![0.0; len]; 3];
    for p in 0..len {
        out[0][p] = s * (a[1][p] * b[2][p] - a[2][p] * b[1][p]);
        out[1][p] = s * (a[2][p] * b[0][p] - a[0][p] * b[2][p]);
        out[2][p] = s * (a[0][p] * b[1][p] - a[1][p] * b[0][p]);
    }
    RealVectorField::new(grid, out).expect("shapes match")
}

/// Result of checking `|G(k)|` against its explicit Fourier-side bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaBoundReport {
    pub max_ratio: f64,
    pub pass: bool,
}

/// Explicit bound on `|G(xi)|` in terms of `||u||^2` and `||grad u||^2`:
/// `(3/2)|xi| l2 + alpha |xi|^2 l2 + alpha ((5/2)|xi| + |xi|^2) grad`.
pub fn lemma1_bound(xi: f64, alpha: f64, l2_sq: f64, grad_l2_sq: f64) -> f64 {
    1.5 * xi * l2_sq + alpha * xi * xi * l2_sq + alpha * (2.5 * xi + xi * xi) * grad_l2_sq
}

/// Evaluates the unprojected nonlinear term at every retained nonzero mode
/// and reports the largest ratio to [`lemma1_bound`].
pub fn lemma1_bound_check(uh: &SpectralVectorField, params: &SimParams) -> Result<LemmaBoundReport> {
    let g = nonlinear_term_spectral(uh, params, false)?;
    Ok(lemma1_ratio(uh, &g, params))
}

pub(crate) fn lemma1_ratio(
    uh: &SpectralVectorField,
    g: &SpectralVectorField,
    params: &SimParams,
) -> LemmaBoundReport {
    let l2 = norm_l2_sq(uh);
    let grad = norm_grad_l2_sq(uh);
    let grid = uh.grid();
    let mut max_ratio: f64 = 0.0;
    for m in 1..grid.len() {
        if !grid.is_retained(m) {
            continue;
        }
        let gm: f64 = g
            .mode(m)
            .iter()
            .map(Complex64::norm_sqr)
            .sum::<f64>()
            .sqrt();
        if gm == 0.0 {
            continue;
        }
        let bound = lemma1_bound(grid.k2(m).sqrt(), params.alpha, l2, grad);
        let ratio = if bound > 0.0 { gm / bound } else { f64::INFINITY };
        max_ratio = max_ratio.max(ratio);
    }
    LemmaBoundReport {
        max_ratio,
        pass: max_ratio <= 1.0 + LEMMA_BOUND_SLACK,
    }
}
