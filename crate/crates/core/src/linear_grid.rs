//! Exact propagation of the linear problem on the periodic grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{norm_grad_l2_sq, Grid, GridSpec, SimParams, SpectralVectorField};

/// Per-mode factors `exp(dt M(k))` for one `(grid, params, dt)` triple.
#[derive(Debug, Clone)]
pub struct PropagatorTable {
    grid: Arc<Grid>,
    params: SimParams,
    dt: f64,
    factors: Vec<f64>,
}

impl PropagatorTable {
    pub fn new(grid: Arc<Grid>, params: SimParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "propagation time must be nonnegative, got {dt}"
            )));
        }
        let factors = grid
            .k2_all()
            .iter()
            .map(|&k2| (dt * params.multiplier(k2)).exp())
            .collect();
        Ok(PropagatorTable {
            grid,
            params,
            dt,
            factors,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> SimParams {
        self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    /// Whether this table was built for `(spec, params, dt)`.
    pub fn matches(&self, spec: GridSpec, params: SimParams, dt: f64) -> bool {
        self.grid.spec() == spec && self.params == params && self.dt == dt
    }

    pub fn apply(&self, uh: &SpectralVectorField) -> SpectralVectorField {
        uh.map_modes(|m, z| z * self.factors[m])
    }
}

/// `u_hat(k, t) = exp(t M(k)) u0_hat(k)`.
pub fn propagate_linear(
    uh0: &SpectralVectorField,
    params: &SimParams,
    t: f64,
) -> Result<SpectralVectorField> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "the linear flow is propagated forward only, got t = {t}"
        )));
    }
    Ok(PropagatorTable::new(uh0.grid().clone(), *params, t)?.apply(uh0))
}

// ||u_bar(s)||^2_{H^1_alpha} in closed form; s may be negative since M is bounded.
fn h1alpha_at(uh0: &SpectralVectorField, params: &SimParams, s: f64) -> f64 {
    let grid = uh0.grid();
    let mut total = 0.0;
    for (m, &k2) in grid.k2_all().iter().enumerate() {
        let e: f64 = uh0.components().iter().map(|c| c[m].norm_sqr()).sum();
        if e != 0.0 {
            total += (1.0 + params.alpha * k2) * (2.0 * s * params.multiplier(k2)).exp() * e;
        }
    }
    total / grid.volume()
}

/// Relative mismatch between a centered difference of `||u_bar||^2_{H^1_alpha}`
/// at `t` and `-2 mu ||grad u_bar(t)||^2`; 0 for zero data.
pub fn linear_energy_residual(
    uh0: &SpectralVectorField,
    params: &SimParams,
    t: f64,
    dt_probe: f64,
) -> Result<f64> {
    if !(dt_probe > 0.0) || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need t >= 0 and dt_probe > 0, got t = {t}, dt_probe = {dt_probe}"
        )));
    }
    let dissipation = 2.0 * params.mu * norm_grad_l2_sq(&propagate_linear(uh0, params, t)?);
    if dissipation == 0.0 {
        return Ok(0.0);
    }
    let slope = (h1alpha_at(uh0, params, t + dt_probe) - h1alpha_at(uh0, params, t - dt_probe))
        / (2.0 * dt_probe);
    Ok((slope + dissipation).abs() / dissipation)
}

/// Slowest decay rate `2 mu k^2 / (1 + alpha k^2)` of `||u_bar||^2` on the
/// torus, at the smallest nonzero wavenumber `2 pi / L`.
pub fn spectral_gap_rate(grid: &Grid, params: &SimParams) -> f64 {
    let k2 = grid.wavenumber_spacing().powi(2);
    -2.0 * params.multiplier(k2)
}

/// Time after which torus decay is dominated by the spectral gap: the
/// reciprocal of [`spectral_gap_rate`].
pub fn spectral_gap_crossover_time(grid: &Grid, params: &SimParams) -> f64 {
    1.0 / spectral_gap_rate(grid, params)
}

/// Serializable summary of the torus caveat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub min_wavenumber: f64,
    pub rate: f64,
    pub crossover_time: f64,
}

impl SpectralGap {
    pub fn of(grid: &Grid, params: &SimParams) -> Self {
        SpectralGap {
            min_wavenumber: grid.wavenumber_spacing(),
            rate: spectral_gap_rate(grid, params),
            crossover_time: spectral_gap_crossover_time(grid, params),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::RealVectorField;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_df(n: usize, l: f64, seed: u64) -> SpectralVectorField {
        let g = Grid::new(3, n, l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..3)
            .map(|_| (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut f = RealVectorField::new(g, comps).unwrap().to_spectral().leray_project();
        f.dealias();
        f
    }

    #[test]
    fn zero_time_is_identity() {
        let f = random_df(8, 3.0, 1);
        let p = SimParams::new(1.0, 1.0).unwrap();
        assert_eq!(propagate_linear(&f, &p, 0.0).unwrap(), f);
        assert!(propagate_linear(&f, &p, -1.0).is_err());
    }

    #[test]
    fn unit_mode_decays_by_e() {
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let mut f = SpectralVectorField::zeros(g.clone());
        f.components_mut()[0][8] = Complex64::new(1.0, 0.0); // k = (0, 1, 0)
        f.components_mut()[0][g.mirror(8)] = Complex64::new(1.0, 0.0);
        assert_eq!(g.k2(8), 1.0);
        let p = SimParams::new(1.0, 1.0).unwrap();
        let out = propagate_linear(&f, &p, 2.0).unwrap();
        assert!((out.components()[0][8].re - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn semigroup_and_nonexpansion() {
        let f = random_df(8, 5.0, 2);
        let p = SimParams::new(0.5, 2.0).unwrap();
        let two = propagate_linear(&propagate_linear(&f, &p, 0.7).unwrap(), &p, 1.9).unwrap();
        let one = propagate_linear(&f, &p, 2.6).unwrap();
        assert!(two.max_abs_diff(&one) <= 1e-13 * f.max_abs());
        for (a, b) in one.components().iter().zip(f.components()) {
            for (x, y) in a.iter().zip(b) {
                assert!(x.norm() <= y.norm());
            }
        }
        assert!(one.divergence_defect() <= 1e-14);
    }

    #[test]
    fn factor_range() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let p = SimParams::new(0.3, 1.2).unwrap();
        let table = PropagatorTable::new(g.clone(), p, 0.4).unwrap();
        let floor = (-0.4 * 1.2 / 0.3f64).exp();
        assert_eq!(table.factors()[0], 1.0);
        assert!(table.factors().iter().all(|&f| f > floor && f <= 1.0));
        assert!(table.matches(g.spec(), p, 0.4));
    }

    #[test]
    fn energy_residual_orders() {
        let f = random_df(8, 4.0, 3);
        let p = SimParams::new(1.0, 1.0).unwrap();
        let a = linear_energy_residual(&f, &p, 1.0, 1e-3).unwrap();
        let b = linear_energy_residual(&f, &p, 1.0, 5e-4).unwrap();
        assert!(a < 1e-6);
        assert!((3.5..4.5).contains(&(a / b)), "ratio {}", a / b);
        let z = SpectralVectorField::zeros(f.grid().clone());
        assert_eq!(linear_energy_residual(&z, &p, 1.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn crossover_time_for_default_box() {
        let g = Grid::new(3, 8, 32.0 * PI).unwrap();
        let p = SimParams::new(1.0, 1.0).unwrap();
        let k2 = (2.0 * PI / (32.0 * PI)).powi(2);
        let expected = (1.0 + k2) / (2.0 * k2);
        assert!((spectral_gap_crossover_time(&g, &p) - expected).abs() < 1e-12 * expected);
    }
}
