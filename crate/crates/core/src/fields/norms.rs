//! Norms computed in frequency space through the discrete Plancherel identity.
//!
//! All values are physical-space integrals over the box (see the
//! normalization note on [`SpectralVectorField`]).

use num_complex::Complex64;

use super::field::SpectralVectorField;
use crate::error::{Error, Result};

/// Highest derivative order accepted by [`norm_dm_h1alpha_sq`].
pub const MAX_DERIVATIVE_ORDER: u32 = 4;

fn weighted_sum(f: &SpectralVectorField, weight: impl Fn(usize, f64) -> f64) -> f64 {
    let grid = f.grid();
    let k2 = grid.k2_all();
    let mut total = 0.0;
    for m in 0..grid.len() {
        let e: f64 = f.components().iter().map(|c| c[m].norm_sqr()).sum();
        if e != 0.0 {
            total += weight(m, k2[m]) * e;
        }
    }
    total / grid.volume()
}

/// `||u||^2_{L^2}`.
pub fn norm_l2_sq(f: &SpectralVectorField) -> f64 {
    weighted_sum(f, |_, _| 1.0)
}

/// `||grad u||^2_{L^2}`.
pub fn norm_grad_l2_sq(f: &SpectralVectorField) -> f64 {
    weighted_sum(f, |_, k2| k2)
}

/// `||u||^2_{L^2} + alpha ||grad u||^2_{L^2}`.
pub fn norm_h1alpha_sq(f: &SpectralVectorField, alpha: f64) -> f64 {
    norm_l2_sq(f) + alpha * norm_grad_l2_sq(f)
}

/// `||D^m u||^2_{H^1_alpha}`: the sum of `|k|^{2m} (1 + alpha |k|^2) |u_hat|^2`.
pub fn norm_dm_h1alpha_sq(f: &SpectralVectorField, alpha: f64, m: u32) -> Result<f64> {
    if m > MAX_DERIVATIVE_ORDER {
        return Err(Error::InvalidParameter(format!(
            "derivative order {m} exceeds {MAX_DERIVATIVE_ORDER}"
        )));
    }
    if m == 0 {
        return Ok(norm_h1alpha_sq(f, alpha));
    }
    Ok(weighted_sum(f, |_, k2| k2.powi(m as i32) * (1.0 + alpha * k2)))
}

/// `(u, u)_{V_2} = ||u||^2 + alpha ||grad u||^2 + ||curl(u - alpha Lap u)||^2`,
/// the curl term summed over retained modes.
pub fn norm_v2_sq(f: &SpectralVectorField, alpha: f64) -> Result<f64> {
    if f.dim() != 3 {
        return Err(Error::UnsupportedDimension(f.dim()));
    }
    let grid = f.grid();
    let mut curl_term = 0.0;
    for m in 0..grid.len() {
        if !grid.is_retained(m) {
            continue;
        }
        let k = grid.wavevector(m);
        let w = 1.0 + alpha * grid.k2(m);
        let v = f.mode(m);
        let c: [Complex64; 3] = [
            v[2] * k[1] - v[1] * k[2],
            v[0] * k[2] - v[2] * k[0],
            v[1] * k[0] - v[0] * k[1],
        ];
        curl_term += w * w * c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(norm_h1alpha_sq(f, alpha) + curl_term / grid.volume())
}
