//! The pseudo-parabolic linear flow on `R^n` for radially specified data.
//!
//! With `|u0_hat(xi)| = A(|xi|)` the linear solution is
//! `u_bar_hat(xi, t) = exp(t M(|xi|)) u0_hat(xi)`, so every norm reduces to a
//! one-dimensional radial integral. Values are frequency-space integrals
//! `int |.|^2 dxi`, i.e. `(2 pi)^n` times the physical-space norms.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay_character::RadialProfile;
use crate::error::{Error, Result};
use crate::fields::SimParams;
use crate::harness::{fit_decay_exponent, FitResult};
use crate::quadrature::QuadOptions;

/// Relative tolerance of the radial quadratures.
pub const LINEAR_QUAD_TOLERANCE: f64 = 1e-9;

/// `M(rho) = -mu rho^2 / (1 + alpha rho^2)`.
pub fn multiplier_m(xi_mag: f64, params: &SimParams) -> f64 {
    params.multiplier(xi_mag * xi_mag)
}

/// `||D^m u_bar(t)||^2` split into its `L^2` and gradient parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearNorms {
    pub l2_sq: f64,
    pub grad_l2_sq: f64,
    pub h1alpha_sq: f64,
}

fn quad_options(rel_tol: f64) -> QuadOptions {
    QuadOptions {
        rel_tol,
        abs_tol: 0.0,
        max_intervals: 20_000,
    }
}

// Radii where exp(2 t M) turns over, plus a decade either side.
fn transition_hints(params: &SimParams, t: f64) -> Vec<f64> {
    if t <= 0.0 {
        return Vec::new();
    }
    let mut hints = Vec::with_capacity(6);
    for base in [1.0 / (params.alpha * t).sqrt(), 1.0 / (params.mu * t).sqrt()] {
        hints.extend([0.1 * base, base, 3.0 * base]);
    }
    hints
}

fn radial_norm(
    profile: &RadialProfile,
    params: &SimParams,
    t: f64,
    weight: impl Fn(f64) -> f64,
    rel_tol: f64,
) -> Result<f64> {
    let hints = transition_hints(params, t);
    profile.radial_integral(
        profile.support_radius(),
        |s| weight(s) * (2.0 * t * multiplier_m(s, params)).exp(),
        &hints,
        &quad_options(rel_tol),
    )
}

fn check_inputs(profile: &RadialProfile, params: &SimParams, t: f64, m: u32) -> Result<()> {
    profile.validate()?;
    params.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
    }
    if m > crate::fields::MAX_DERIVATIVE_ORDER {
        return Err(Error::InvalidParameter(format!("derivative order {m} is too large")));
    }
    Ok(())
}

/// `int rho^{2m} (1 + alpha rho^2) exp(2 t M) A^2 dxi` over `R^n`.
pub fn linear_norm_sq(profile: &RadialProfile, params: &SimParams, t: f64, m: u32) -> Result<f64> {
    Ok(linear_norms(profile, params, t, m)?.h1alpha_sq)
}

/// Like [`linear_norm_sq`] but with a caller-chosen relative tolerance.
pub fn linear_norm_sq_with_tolerance(
    profile: &RadialProfile,
    params: &SimParams,
    t: f64,
    m: u32,
    rel_tol: f64,
) -> Result<f64> {
    check_inputs(profile, params, t, m)?;
    let (alpha, p) = (params.alpha, 2 * m as i32);
    radial_norm(profile, params, t, |s| s.powi(p) * (1.0 + alpha * s * s), rel_tol)
}

/// The `L^2` and gradient parts of `||D^m u_bar(t)||^2`, integrated separately.
pub fn linear_norms(profile: &RadialProfile, params: &SimParams, t: f64, m: u32) -> Result<LinearNorms> {
    check_inputs(profile, params, t, m)?;
    let p = 2 * m as i32;
    let l2_sq = radial_norm(profile, params, t, |s| s.powi(p), LINEAR_QUAD_TOLERANCE)?;
    let grad_l2_sq = radial_norm(profile, params, t, |s| s.powi(p + 2), LINEAR_QUAD_TOLERANCE)?;
    Ok(LinearNorms {
        l2_sq,
        grad_l2_sq,
        h1alpha_sq: l2_sq + params.alpha * grad_l2_sq,
    })
}

/// Norms of the linear solution sampled in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDecayCurve {
    pub times: Vec<f64>,
    pub l2_sq: Vec<f64>,
    pub grad_l2_sq: Vec<f64>,
    pub h1alpha_sq: Vec<f64>,
    pub order: u32,
    pub params: SimParams,
    pub profile: RadialProfile,
}

/// `per_decade` logarithmically spaced times from `t_min` to `t_max`, both included.
pub fn log_time_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && per_decade > 0) {
        return Err(Error::InvalidParameter(format!(
            "time grid needs 0 < t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    let decades = (t_max / t_min).log10();
    let count = (decades * per_decade as f64).round().max(1.0) as usize;
    let (a, b) = (t_min.ln(), t_max.ln());
    Ok((0..=count)
        .map(|j| {
            if j == 0 {
                t_min
            } else if j == count {
                t_max
            } else {
                (a + (b - a) * j as f64 / count as f64).exp()
            }
        })
        .collect())
}

/// The default sampling: 32 points per decade over `[0.1, 1e4]`.
pub fn default_time_grid() -> Vec<f64> {
    log_time_grid(0.1, 1e4, 32).expect("constant arguments are valid")
}

/// Evaluates the linear norms at each of `times` (nonnegative, increasing).
pub fn linear_decay_curve(
    profile: &RadialProfile,
    params: &SimParams,
    times: &[f64],
    m: u32,
) -> Result<LinearDecayCurve> {
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "curve times must be nonnegative and strictly increasing".into(),
        ));
    }
    let norms = times
        .par_iter()
        .map(|&t| linear_norms(profile, params, t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearDecayCurve {
        times: times.to_vec(),
        l2_sq: norms.iter().map(|v| v.l2_sq).collect(),
        grad_l2_sq: norms.iter().map(|v| v.grad_l2_sq).collect(),
        h1alpha_sq: norms.iter().map(|v| v.h1alpha_sq).collect(),
        order: m,
        params: *params,
        profile: profile.clone(),
    })
}

impl LinearDecayCurve {
    /// The last two decades of the sampled time range.
    pub fn default_fit_window(&self) -> (f64, f64) {
        let t_max = self.times.last().copied().unwrap_or(0.0);
        (t_max / 100.0, t_max)
    }

    /// Largest relative increase between consecutive samples (0 for a
    /// nonincreasing curve).
    pub fn max_relative_increase(&self) -> f64 {
        self.h1alpha_sq
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| (w[1] - w[0]) / w[0])
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,l2_sq,grad_l2_sq,h1alpha_sq,m")?;
        for j in 0..self.times.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{}",
                self.times[j], self.l2_sq[j], self.grad_l2_sq[j], self.h1alpha_sq[j], self.order
            )?;
        }
        Ok(())
    }
}

/// Log-log slope of `h1alpha_sq` against `t + 1` over `window`.
pub fn fit_linear_exponent(curve: &LinearDecayCurve, window: (f64, f64)) -> Result<FitResult> {
    let (lo, hi) = (curve.times.first(), curve.times.last());
    match (lo, hi) {
        (Some(&lo), Some(&hi)) if window.0 >= lo * (1.0 - 1e-12) && window.1 <= hi * (1.0 + 1e-12) => {
            fit_decay_exponent(&curve.times, &curve.h1alpha_sq, window)
        }
        _ => Err(Error::InvalidParameter(format!(
            "fit window [{}, {}] lies outside the sampled times",
            window.0, window.1
        ))),
    }
}

/// Decay exponent `-(n/2 + r + m)` of `||D^m u_bar||^2` for power-law data.
pub fn predicted_linear_exponent(r: f64, n: usize, m: u32) -> f64 {
    -(n as f64 / 2.0 + r + m as f64)
}

/// Empirical constants of `c1 (t+1)^{-k} <= h(t) <= c2 (t+c3)^{-k}`, `k = n/2 + r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub valid: bool,
}

/// `c3` is fixed at 1; `c1` / `c2` are the min / max of the compensated curve.
pub fn sandwich_constants(curve: &LinearDecayCurve, r: f64, n: usize) -> SandwichConstants {
    let c3 = 1.0;
    let k = n as f64 / 2.0 + r;
    let compensated = |shift: f64| {
        curve
            .times
            .iter()
            .zip(&curve.h1alpha_sq)
            .map(move |(&t, &h)| h * (t + shift).powf(k))
    };
    let c1 = compensated(1.0).fold(f64::INFINITY, f64::min);
    let c2 = compensated(c3).fold(0.0, f64::max);
    let (c1, c2) = if curve.times.is_empty() { (0.0, 0.0) } else { (c1, c2) };
    SandwichConstants {
        c1,
        c2,
        c3,
        valid: c1 > 0.0 && c1 <= c2 && c2.is_finite(),
    }
}

/// Relative mismatch of the energy identity `d/dt h = -2 mu ||grad u_bar||^2`
/// at `t`, using a centered difference with step `dt`.
pub fn energy_identity_residual(
    profile: &RadialProfile,
    params: &SimParams,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0 && t >= dt) {
        return Err(Error::InvalidParameter(format!(
            "centered difference needs 0 < dt <= t, got dt = {dt}, t = {t}"
        )));
    }
    let tight = 1e-12;
    let plus = linear_norm_sq_with_tolerance(profile, params, t + dt, 0, tight)?;
    let minus = linear_norm_sq_with_tolerance(profile, params, t - dt, 0, tight)?;
    let grad = radial_norm(profile, params, t, |s| s * s, tight)?;
    let dissipation = 2.0 * params.mu * grad;
    if dissipation == 0.0 {
        return Ok(0.0);
    }
    Ok(((plus - minus) / (2.0 * dt) + dissipation).abs() / dissipation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> SimParams {
        SimParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn multiplier_values() {
        assert_eq!(multiplier_m(0.0, &unit()), 0.0);
        assert_eq!(multiplier_m(1.0, &unit()), -0.5);
        let p = SimParams::new(2.0, 3.0).unwrap();
        let far = multiplier_m(1e6, &p);
        assert!(far > -1.5 && far < -1.5 + 1e-9);
    }

    #[test]
    fn initial_mass_matches_shell_energy() {
        let profile = RadialProfile::power_law(0.0, 3);
        let h0 = linear_norm_sq(&profile, &unit(), 0.0, 0).unwrap();
        // The flat part contributes 4 pi (1/3 + 1/5) exactly.
        let flat = 4.0 * PI * (1.0 / 3.0 + 1.0 / 5.0);
        assert!(h0 > flat);
        let taper = profile
            .radial_integral(1.5, |s| 1.0 + s * s, &[], &QuadOptions::default())
            .unwrap();
        assert!((h0 - taper).abs() < 1e-8 * h0);
    }

    #[test]
    fn zero_profile_stays_zero() {
        let profile = RadialProfile::power_law(0.0, 3).with_amplitude(0.0);
        for t in [0.0, 1.0, 1e3] {
            assert_eq!(linear_norm_sq(&profile, &unit(), t, 1).unwrap(), 0.0);
        }
        let curve = linear_decay_curve(&profile, &unit(), &[0.0, 1.0, 2.0], 0).unwrap();
        assert!(!sandwich_constants(&curve, 0.0, 3).valid);
    }

    #[test]
    fn late_time_ratio_matches_heat_scaling() {
        let profile = RadialProfile::power_law(0.0, 3);
        let a = linear_norm_sq(&profile, &unit(), 1e3, 0).unwrap();
        let b = linear_norm_sq(&profile, &unit(), 1e4, 0).unwrap();
        let slope = (b / a).ln() / ((1e4 + 1.0_f64) / (1e3 + 1.0)).ln();
        assert!((slope + 1.5).abs() < 0.015, "slope {slope}");
        // Self-convergence: a looser tolerance gives the same value.
        let loose = linear_norm_sq_with_tolerance(&profile, &unit(), 1e4, 0, 1e-6).unwrap();
        assert!((loose - b).abs() < 1e-5 * b);
    }

    #[test]
    fn parts_sum_to_h1alpha() {
        let profile = RadialProfile::power_law(-0.5, 3);
        let p = SimParams::new(0.7, 1.3).unwrap();
        let v = linear_norms(&profile, &p, 5.0, 1).unwrap();
        assert!((v.h1alpha_sq - (v.l2_sq + 0.7 * v.grad_l2_sq)).abs() <= 1e-15 * v.h1alpha_sq);
        let direct = linear_norm_sq_with_tolerance(&profile, &p, 5.0, 1, 1e-12).unwrap();
        assert!((direct - v.h1alpha_sq).abs() < 1e-8 * direct);
    }

    #[test]
    fn divergent_data_rejected() {
        let profile = RadialProfile::power_law(-1.5, 3);
        assert!(linear_norm_sq(&profile, &unit(), 1.0, 0).is_err());
        assert!(linear_norm_sq(&RadialProfile::power_law(0.0, 3), &unit(), -1.0, 0).is_err());
    }

    #[test]
    fn time_grid_shape() {
        let g = default_time_grid();
        assert_eq!(g.len(), 5 * 32 + 1);
        assert_eq!(g[0], 0.1);
        assert_eq!(*g.last().unwrap(), 1e4);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn energy_identity_second_order() {
        let profile = RadialProfile::power_law(0.0, 3);
        let r1 = energy_identity_residual(&profile, &unit(), 2.0, 1e-2).unwrap();
        let r2 = energy_identity_residual(&profile, &unit(), 2.0, 5e-3).unwrap();
        assert!(r1 < 1e-3);
        let ratio = r1 / r2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let profile = RadialProfile::power_law(0.0, 3);
        let curve = linear_decay_curve(&profile, &unit(), &[0.0, 1.0], 2).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,l2_sq,grad_l2_sq,h1alpha_sq,m");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",2"));
    }
}
