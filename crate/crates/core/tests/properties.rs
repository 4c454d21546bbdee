use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdecay_core::decay_character::{
    estimate_characters, log_radii, shell_energy, SpectrumSource,
};
use sgdecay_core::fields::norm_l2_sq;
use sgdecay_core::harness::{
    fit_decay_exponent, lower_bound_applicable, predicted_difference_exponent,
    predicted_lower_exponent, predicted_nonlinear_exponent, predicted_rate_gap,
};
use sgdecay_core::linear_grid::propagate_linear;
use sgdecay_core::{EstimatorOptions, Grid, RadialProfile, RealVectorField, SimParams};

fn random_real(n: usize, l: f64, seed: u64) -> RealVectorField {
    let grid = Grid::new(3, n, l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..3)
        .map(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    RealVectorField::new(grid, comps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip(seed in any::<u64>(), n in prop::sample::select(vec![8usize, 10, 12]), l in 0.5f64..50.0) {
        let u = random_real(n, l, seed);
        let back = u.to_spectral().to_real().unwrap();
        for (a, b) in u.components().iter().zip(back.components()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn plancherel(seed in any::<u64>(), l in 0.5f64..50.0) {
        let u = random_real(8, l, seed);
        let quad = u.quadrature_l2_sq();
        let spec = norm_l2_sq(&u.to_spectral());
        prop_assert!((quad - spec).abs() <= 1e-12 * quad);
    }

    #[test]
    fn leray_projection_is_idempotent(seed in any::<u64>(), l in 0.5f64..50.0) {
        let p = random_real(8, l, seed).to_spectral().leray_project();
        let pp = p.leray_project();
        prop_assert!(p.max_abs_diff(&pp) <= 1e-14 * p.max_abs());
        prop_assert!(p.divergence_defect() <= 1e-12);
    }

    #[test]
    fn linear_flow_never_amplifies(seed in any::<u64>(), t in 0.0f64..100.0, alpha in 0.01f64..10.0, mu in 0.01f64..10.0) {
        let mut uh = random_real(8, 10.0, seed).to_spectral().leray_project();
        uh.dealias();
        let params = SimParams::new(alpha, mu).unwrap();
        let out = propagate_linear(&uh, &params, t).unwrap();
        for (a, b) in out.components().iter().zip(uh.components()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!(x.norm() <= y.norm());
            }
        }
    }

    #[test]
    fn fit_ignores_scale(c in 1e-6f64..1e6, p in -4.0f64..0.0, wobble in 0.0f64..0.2) {
        let times: Vec<f64> = (0..200).map(|j| 10f64.powf(j as f64 / 40.0)).collect();
        let values: Vec<f64> = times.iter().map(|t| t.powf(p) * (1.0 + wobble * t.ln().sin())).collect();
        let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
        let a = fit_decay_exponent(&times, &values, (1.0, 1e4)).unwrap();
        let b = fit_decay_exponent(&times, &scaled, (1.0, 1e4)).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() <= 1e-10);
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() <= 1e-9);
    }

    #[test]
    fn predicted_exponents_are_consistent(r in -1.49f64..3.0) {
        let u = predicted_nonlinear_exponent(r).unwrap();
        let w = predicted_difference_exponent(r).unwrap();
        prop_assert!(u <= 2.5 && w <= 2.5);
        prop_assert!(w >= u || r >= 1.0);
        if lower_bound_applicable(r) {
            prop_assert!(predicted_lower_exponent(r) >= u - 1e-15);
            prop_assert!(predicted_rate_gap(r).unwrap() >= 0.0);
        }
        if r <= 0.0 {
            prop_assert!((w - u - (1.0 + r / 2.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn characters_bracket_estimate(r in -1.2f64..2.5, amp in 0.01f64..100.0) {
        let profile = RadialProfile::power_law(r, 3).with_amplitude(amp);
        let samples = shell_energy(SpectrumSource::Profile(&profile), &log_radii(0.5, 5e-5, 65)).unwrap();
        let rep = estimate_characters(&samples, &EstimatorOptions::default()).unwrap();
        prop_assert!(rep.r_minus <= rep.r_plus);
        let r_hat = rep.r_hat.unwrap();
        prop_assert!(rep.r_minus <= r_hat && r_hat <= rep.r_plus);
        prop_assert!((r_hat - r).abs() < 0.05);
    }
}

#[test]
fn round_trip_on_default_box() {
    let u = random_real(16, 32.0 * PI, 5);
    let back = u.to_spectral().to_real().unwrap();
    let err = u
        .components()
        .iter()
        .zip(back.components())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(err <= 1e-12);
}
