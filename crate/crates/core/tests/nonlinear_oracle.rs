//! The pseudo-spectral nonlinear term against an independent evaluation
//! through `(curl q) x u = (u . grad) q - sum_j u_j grad q_j`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdecay_core::fields::{
    lemma1_bound_check, nonlinear_term_spectral, HelmholtzDirection, LEMMA_BOUND_SLACK,
};
use sgdecay_core::{Grid, RealVectorField, SimParams, SpectralVectorField};

fn random_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, decay: f64) -> SpectralVectorField {
    let comps = (0..3)
        .map(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let raw = RealVectorField::new(grid.clone(), comps).unwrap().to_spectral();
    let k2 = grid.k2_all().to_vec();
    let mut f = raw
        .map_modes(|m, z| z * (-decay * k2[m]).exp())
        .leray_project();
    f.dealias();
    f
}

fn identity_oracle(uh: &SpectralVectorField, params: &SimParams) -> SpectralVectorField {
    let grid = uh.grid().clone();
    let q = uh.helmholtz_weight(params.alpha, HelmholtzDirection::Forward);
    let u = uh.to_real().unwrap();
    // dq[j][a] = d_j q_a on the grid.
    let dq: Vec<RealVectorField> = (0..3).map(|j| q.partial(j).to_real().unwrap()).collect();
    let uc = u.components();
    let mut out = vec![vec![0.0; grid.len()]; 3];
    for p in 0..grid.len() {
        for a in 0..3 {
            let mut advect = 0.0;
            let mut grad_part = 0.0;
            for j in 0..3 {
                advect += uc[j][p] * dq[j].components()[a][p];
                grad_part += uc[j][p] * dq[a].components()[j][p];
            }
            out[a][p] = -(advect - grad_part);
        }
    }
    let mut g = RealVectorField::new(grid, out).unwrap().to_spectral();
    g.dealias();
    g.zero_mean();
    g
}

#[test]
fn matches_vector_identity_on_16_cubed() {
    let grid = Grid::new(3, 16, 2.0 * PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for alpha in [0.01, 0.5, 2.0] {
        let params = SimParams::new(alpha, 1.0).unwrap();
        let uh = random_field(&grid, &mut rng, 0.05);
        let g = nonlinear_term_spectral(&uh, &params, false).unwrap();
        let oracle = identity_oracle(&uh, &params);
        let scale = oracle.max_abs();
        assert!(scale > 0.0);
        let err = g.max_abs_diff(&oracle) / scale;
        assert!(err < 1e-8, "alpha = {alpha}: relative error {err:.3e}");
    }
}

#[test]
fn shear_flow_term_is_a_gradient() {
    let grid = Grid::new(3, 16, 2.0 * PI).unwrap();
    let params = SimParams::new(1.0, 1.0).unwrap();
    let u = RealVectorField::from_fn(grid, |x| [0.3 * x[1].sin(), 0.0, 0.0]);
    let mut uh = u.to_spectral();
    uh.dealias();
    let raw = nonlinear_term_spectral(&uh, &params, false).unwrap();
    assert!(raw.max_abs() > 1e-3);
    let projected = nonlinear_term_spectral(&uh, &params, true).unwrap();
    assert!(projected.max_abs() <= 1e-12 * raw.max_abs());
}

#[test]
fn rejects_compressible_input() {
    let grid = Grid::new(3, 8, 2.0 * PI).unwrap();
    let params = SimParams::new(1.0, 1.0).unwrap();
    let u = RealVectorField::from_fn(grid, |x| [x[0].sin(), 0.0, 0.0]);
    assert!(nonlinear_term_spectral(&u.to_spectral(), &params, false).is_err());
}

#[test]
fn fourier_bound_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (n, fields) in [(16, 50), (32, 34), (48, 16)] {
        for i in 0..fields {
            let l = [2.0 * PI, 8.0 * PI, 32.0 * PI][i % 3];
            let grid = Grid::new(3, n, l).unwrap();
            let alpha = [0.1, 1.0, 4.0][i % 3];
            let params = SimParams::new(alpha, 1.0).unwrap();
            let uh = random_field(&grid, &mut rng, [0.0, 0.02, 0.2][(i / 3) % 3]);
            let report = lemma1_bound_check(&uh, &params).unwrap();
            worst = worst.max(report.max_ratio);
            assert!(report.pass, "n = {n}, field {i}: ratio {}", report.max_ratio);
            count += 1;
        }
    }
    assert_eq!(count, 100);
    assert!(worst <= 1.0 + LEMMA_BOUND_SLACK);
}
