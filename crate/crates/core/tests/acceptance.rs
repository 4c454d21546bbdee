//! End-to-end acceptance criteria. Each test prints one `PASS` / `FAIL`
//! line (bypassing output capture) before asserting.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgdecay_core::config::{CharacterSource, ExperimentConfig, Mode, ProfileConfig, ProfileKind};
use sgdecay_core::decay_character::{
    decay_indicator, estimate_characters, log_radii, shell_energy, shift_by_gradient,
    shell_energy_weighted, SpectrumSource,
};
use sgdecay_core::experiment::{character_samples, compare, linear_reports, run_experiment, SimulationChecks};
use sgdecay_core::fields::{lemma1_bound_check, LEMMA_BOUND_SLACK};
use sgdecay_core::harness::{
    fit_decay_exponent, lower_bound_applicable, predicted_difference_exponent,
    predicted_nonlinear_exponent, CheckOutcome, Verdict,
};
use sgdecay_core::linear_grid::{linear_energy_residual, propagate_linear};
use sgdecay_core::{
    EstimatorOptions, Grid, RadialProfile, RealVectorField, SimParams, SpectralVectorField,
    TrajectoryRecord, VerificationReport,
};

fn verdict_line(id: u32, title: &str, pass: bool, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {id:>2} {word}: {title}: {detail}");
    let _ = out.flush();
}

fn random_solenoidal(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, decay: f64) -> SpectralVectorField {
    let comps = (0..3)
        .map(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let raw = RealVectorField::new(grid.clone(), comps).unwrap().to_spectral();
    let k2 = grid.k2_all().to_vec();
    let mut f = raw.map_modes(|m, z| z * (-decay * k2[m]).exp()).leray_project();
    f.dealias();
    f
}

struct NonlinearRun {
    report: VerificationReport,
    checks: SimulationChecks,
    record: TrajectoryRecord,
}

fn nonlinear_run(r: f64) -> NonlinearRun {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new(Mode::Compare, 1.0, 1.0, ProfileConfig::power_law(r));
    c.grid.n_points = 48;
    c.grid.box_length = 32.0 * PI;
    c.solver.t_end = 50.0;
    c.profile.target_v2_norm = Some(1e-2);
    c.output = dir.path().to_path_buf();
    c.normalize().unwrap();
    let (report, checks, record, _, _) = compare(&c, dir.path()).unwrap();
    NonlinearRun {
        report,
        checks,
        record,
    }
}

fn flat_run() -> &'static NonlinearRun {
    static RUN: OnceLock<NonlinearRun> = OnceLock::new();
    RUN.get_or_init(|| nonlinear_run(0.0))
}

fn check<'a>(report: &'a VerificationReport, name: &str) -> &'a CheckOutcome {
    report.checks.iter().find(|c| c.name == name).unwrap()
}

#[test]
fn criterion_01_linear_sandwich_rates() {
    let mut ok = true;
    let mut detail = Vec::new();
    for r in [-1.0, -0.5, 0.0, 1.0, 2.0] {
        let mut c = ExperimentConfig::new(Mode::LinearDecay, 1.0, 1.0, ProfileConfig::power_law(r));
        c.windows.linear = Some((1e2, 1e4));
        c.normalize().unwrap();
        let (_, reports) = linear_reports(&c).unwrap();
        let rep = &reports[0];
        let predicted = -(1.5 + r);
        let sandwich = rep.sandwich.unwrap();
        let this = (rep.fit.exponent - predicted).abs() <= 0.05 && sandwich.valid && sandwich.c1 > 0.0;
        ok &= this;
        detail.push(format!("r={r}: {:.4} vs {predicted}", rep.fit.exponent));
    }
    verdict_line(1, "linear sandwich rates", ok, &detail.join(", "));
    assert!(ok);
}

#[test]
fn criterion_02_derivative_decay() {
    let mut ok = true;
    let mut detail = Vec::new();
    for r in [-1.0, -0.5, 0.0, 1.0, 2.0] {
        let mut c = ExperimentConfig::new(Mode::LinearDecay, 1.0, 1.0, ProfileConfig::power_law(r));
        c.linear.orders = vec![1, 2, 3];
        c.windows.linear = Some((1e2, 1e4));
        c.normalize().unwrap();
        let (_, reports) = linear_reports(&c).unwrap();
        for rep in &reports {
            let predicted = -(1.5 + r + rep.m as f64);
            let this = (rep.fit.exponent - predicted).abs() <= 0.05;
            ok &= this;
            if !this || rep.m == 3 {
                detail.push(format!("r={r} m={}: {:.4} vs {predicted}", rep.m, rep.fit.exponent));
            }
        }
    }
    verdict_line(2, "derivative decay", ok, &detail.join(", "));
    assert!(ok);
}

#[test]
fn criterion_03_pointwise_non_expansion() {
    let grid = Grid::new(3, 32, 2.0 * PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u0 = random_solenoidal(&grid, &mut rng, 0.0);
    let params = SimParams::new(1.0, 1.0).unwrap();
    let mut violations = 0usize;
    for _ in 0..50 {
        let t = rng.random_range(0.0..100.0);
        let ut = propagate_linear(&u0, &params, t).unwrap();
        for (a, b) in ut.components().iter().zip(u0.components()) {
            violations += a.iter().zip(b).filter(|(x, y)| x.norm() > y.norm()).count();
        }
    }
    verdict_line(3, "pointwise non-expansion", violations == 0, &format!("{violations} violations over 50 times"));
    assert_eq!(violations, 0);
}

#[test]
fn criterion_04_linear_energy_identity() {
    let grid = Grid::new(3, 16, 2.0 * PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u0 = random_solenoidal(&grid, &mut rng, 0.0);
    let params = SimParams::new(1.0, 1.0).unwrap();
    let probe = 1e-3 * params.alpha / params.mu;
    let a = linear_energy_residual(&u0, &params, 1.0, probe).unwrap();
    let b = linear_energy_residual(&u0, &params, 1.0, 0.5 * probe).unwrap();
    let ratio = a / b;
    let ok = a < 1e-6 && (3.5..=4.5).contains(&ratio);
    verdict_line(4, "linear energy identity", ok, &format!("residual {a:.3e}, halving ratio {ratio:.3}"));
    assert!(ok);
}

#[test]
fn criterion_05_nonlinear_energy_law() {
    let run = flat_run();
    let c = &run.checks;
    let ok = c.monotone && c.balance_ok && c.a_priori_ok;
    verdict_line(
        5,
        "nonlinear energy law",
        ok,
        &format!(
            "nonincreasing {}, balance error {:.3e}, a priori bound {}, dt {:.4}",
            c.monotone, c.balance_error, c.a_priori_ok, c.dt.dt
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_fourier_bound_of_nonlinear_term() {
    let run = flat_run();
    let run_ok = run.checks.lemma1_ok
        && run.record.lemma1_evaluations > 0
        && run
            .record
            .lemma1_max_ratios
            .iter()
            .flatten()
            .all(|&v| v <= 1.0 + LEMMA_BOUND_SLACK);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (n, fields) in [(16, 50), (32, 34), (48, 16)] {
        for i in 0..fields {
            let grid = Grid::new(3, n, [2.0 * PI, 8.0 * PI, 32.0 * PI][i % 3]).unwrap();
            let params = SimParams::new([0.1, 1.0, 4.0][i % 3], 1.0).unwrap();
            let uh = random_solenoidal(&grid, &mut rng, [0.0, 0.02, 0.2][(i / 3) % 3]);
            worst = worst.max(lemma1_bound_check(&uh, &params).unwrap().max_ratio);
            count += 1;
        }
    }
    let ok = run_ok && count == 100 && worst <= 1.0 + LEMMA_BOUND_SLACK;
    verdict_line(
        6,
        "nonlinear term Fourier bound",
        ok,
        &format!(
            "run max ratio {:.4e} over {} evaluations, static max {worst:.4e} over {count} fields",
            run.record.lemma1_max_over_run, run.record.lemma1_evaluations
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_decay_character_estimator() {
    let mut ok = true;
    let mut detail = Vec::new();
    let opts = EstimatorOptions::default();
    for r in [-1.0, 0.0, 1.0, 2.0] {
        let profile = RadialProfile::power_law(r, 3);
        let radii = log_radii(0.5, 5e-5, 65);
        let s = shell_energy(SpectrumSource::Profile(&profile), &radii).unwrap();
        let rep = estimate_characters(&s, &opts).unwrap();
        let this = rep.r_hat.is_some_and(|h| (h - r).abs() <= 0.05);
        ok &= this;
        detail.push(format!("continuum r={r}: {:?}", rep.r_hat.map(|h| (h * 1e4).round() / 1e4)));

        let amp = 1.7;
        let exact = 4.0 * PI / (2.0 * r + 3.0) * amp * amp;
        let scaled = profile.clone().with_amplitude(amp);
        let s = shell_energy(SpectrumSource::Profile(&scaled), &radii).unwrap();
        let ind = decay_indicator(&s, r, &opts).unwrap();
        let identity_ok = s
            .radii
            .iter()
            .zip(&s.shell_energy)
            .all(|(rho, e)| (rho.powf(-2.0 * r - 3.0) * e / exact - 1.0).abs() <= 0.01)
            && (ind.p_lower / exact - 1.0).abs() <= 0.01
            && (ind.p_upper / exact - 1.0).abs() <= 0.01;
        ok &= identity_ok;
        if !identity_ok {
            detail.push(format!("indicator identity failed for r={r}"));
        }
    }
    for r in [-1.0, 0.0, 1.0, 2.0] {
        let mut c = ExperimentConfig::new(Mode::DecayCharacter, 1.0, 1.0, ProfileConfig::power_law(r));
        c.grid.n_points = 64;
        c.grid.box_length = 64.0 * PI;
        c.profile.cutoff_radius = 0.4;
        c.profile.smoothing_width = 0.2;
        c.decay_character.source = CharacterSource::Grid;
        c.normalize().unwrap();
        let (base, _, lattice_opts, _) = character_samples(&c).unwrap();
        let rep = estimate_characters(&base, &lattice_opts).unwrap();
        let this = rep.r_hat.is_some_and(|h| (h - r).abs() <= 0.15);
        ok &= this;
        detail.push(format!(
            "grid r={r}: {:?} (r+ {:.3}, r- {:.3})",
            rep.r_hat.map(|h| (h * 1e4).round() / 1e4),
            rep.r_plus,
            rep.r_minus
        ));
    }
    let mut c = ExperimentConfig::new(Mode::DecayCharacter, 1.0, 1.0, ProfileConfig::default());
    c.profile.kind = ProfileKind::Oscillatory;
    c.profile.r_lo = Some(-1.0);
    c.profile.r_hi = Some(0.0);
    c.normalize().unwrap();
    let (base, _, osc_opts, _) = character_samples(&c).unwrap();
    let rep = estimate_characters(&base, &osc_opts).unwrap();
    let osc_ok = rep.r_plus - rep.r_minus >= 0.6 && rep.r_hat.is_none();
    ok &= osc_ok;
    detail.push(format!("oscillatory r+ - r- = {:.3}, r_hat {:?}", rep.r_plus - rep.r_minus, rep.r_hat));
    verdict_line(7, "decay-character estimator", ok, &detail.join("; "));
    assert!(ok);
}

#[test]
fn criterion_08_shift_theorem() {
    let opts = EstimatorOptions::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for r in [-1.0, 0.0, 1.0] {
        let profile = RadialProfile::power_law(r, 3);
        let radii = log_radii(0.5, 5e-5, 65);
        let base = shell_energy(SpectrumSource::Profile(&profile), &radii).unwrap();
        let grad = shell_energy_weighted(SpectrumSource::Profile(&profile), &radii, 1).unwrap();
        let rep = shift_by_gradient(&base, &grad, &opts, 0.1).unwrap();
        let this = rep.difference.is_some_and(|d| (d - 1.0).abs() <= 0.1);
        ok &= this;
        detail.push(format!("r={r}: {:.4}", rep.difference.unwrap_or(f64::NAN)));
    }
    verdict_line(8, "gradient shift of the character", ok, &detail.join(", "));
    assert!(ok);
}

#[test]
fn criterion_09_nonlinear_upper_bound() {
    let run = flat_run();
    let c = check(&run.report, "upper_bound_solution");
    let ok = c.verdict == Verdict::Pass;
    verdict_line(
        9,
        "nonlinear upper bound",
        ok,
        &format!(
            "observed exponent {:.4} over [{:.1}, {:.1}], predicted -{:.2} (tol {}), C {:.4e}, verdict {:?}",
            c.observed.map(|f| f.exponent).unwrap_or(f64::NAN),
            c.window.0,
            c.window.1,
            c.predicted.unwrap_or(f64::NAN),
            c.tolerance,
            c.constant.unwrap_or(f64::NAN),
            c.verdict
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_asymptotic_equivalence() {
    let run = flat_run();
    let starts_at_zero = run.record.w_h1alpha_sq.first() == Some(&0.0);
    let order = check(&run.report, "difference_ordering");
    let window = order.window;
    let fu = fit_decay_exponent(&run.record.times, &run.record.u_h1alpha_sq, window).unwrap();
    let fw = fit_decay_exponent(&run.record.times, &run.record.w_h1alpha_sq, window).unwrap();
    let ordering_ok = fw.exponent <= fu.exponent;

    let rough = nonlinear_run(-1.0);
    let gap_window = check(&rough.report, "rate_gap").window;
    let gu = fit_decay_exponent(&rough.record.times, &rough.record.u_h1alpha_sq, gap_window).unwrap();
    let gw = fit_decay_exponent(&rough.record.times, &rough.record.w_h1alpha_sq, gap_window).unwrap();
    let gap = gu.exponent - gw.exponent;
    let predicted = 1.0 + (-1.0) / 2.0;
    let gap_ok = (gap - predicted).abs() <= 0.3 && rough.record.w_h1alpha_sq[0] == 0.0;

    let ok = starts_at_zero && ordering_ok && gap_ok;
    verdict_line(
        10,
        "asymptotic equivalence",
        ok,
        &format!(
            "w(0) = 0: {starts_at_zero}; r=0 slopes u {:.4}, w {:.4}; r=-1 slopes u {:.4}, w {:.4} over [{:.1}, {:.1}], gap {gap:.4} vs {predicted} +- 0.3",
            fu.exponent, fw.exponent, gu.exponent, gw.exponent, gap_window.0, gap_window.1
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_11_predicted_exponent_formulas() {
    let rs = [-1.4, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
    let nonlinear = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 2.5];
    let difference = [0.4, 1.0, 1.75, 2.5, 2.5, 2.5, 2.5];
    let applicable = [true, true, true, true, true, false, false];
    let mut ok = true;
    for (j, &r) in rs.iter().enumerate() {
        ok &= (predicted_nonlinear_exponent(r).unwrap() - nonlinear[j]).abs() <= 1e-12;
        ok &= (predicted_difference_exponent(r).unwrap() - difference[j]).abs() <= 1e-12;
        ok &= lower_bound_applicable(r) == applicable[j];
    }
    ok &= predicted_nonlinear_exponent(-1.5).is_err() && predicted_difference_exponent(-1.5).is_err();
    verdict_line(11, "predicted-exponent formulas", ok, &format!("{} grid points", rs.len()));
    assert!(ok);
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_12_reproducibility() {
    let mut configs = Vec::new();
    let mut lin = ExperimentConfig::new(Mode::LinearDecay, 1.0, 1.0, ProfileConfig::power_law(0.5));
    lin.linear.orders = vec![0, 1];
    configs.push(lin);
    let mut sim = ExperimentConfig::new(Mode::Simulate, 1.0, 1.0, ProfileConfig::power_law(0.0));
    sim.grid.n_points = 16;
    sim.grid.box_length = 16.0 * PI;
    sim.profile.cutoff_radius = 0.3;
    sim.profile.smoothing_width = 0.2;
    sim.solver.t_end = 3.0;
    sim.seed = Some(12);
    configs.push(sim);
    let mut chars = ExperimentConfig::new(Mode::DecayCharacter, 1.0, 1.0, ProfileConfig::power_law(1.0));
    chars.grid.n_points = 32;
    chars.grid.box_length = 64.0 * PI;
    chars.profile.cutoff_radius = 0.2;
    chars.profile.smoothing_width = 0.1;
    chars.decay_character.source = CharacterSource::Grid;
    chars.decay_character.radius_max = Some(0.3);
    configs.push(chars);
    let mut sweep = ExperimentConfig::new(Mode::Sweep, 1.0, 1.0, ProfileConfig::power_law(0.0));
    sweep.sweep.r_values = vec![-0.5, 0.0, 1.0];
    sweep.linear.per_decade = 8;
    configs.push(sweep);

    let mut ok = true;
    let mut compared = 0;
    for base in configs {
        let runs: Vec<_> = [1usize, 2]
            .iter()
            .map(|&jobs| {
                let dir = tempfile::tempdir().unwrap();
                let mut c = base.clone();
                c.output = dir.path().to_path_buf();
                c.normalize().unwrap();
                run_experiment(&c, jobs).unwrap();
                let files = csv_bytes(dir.path());
                (dir, files)
            })
            .collect();
        ok &= !runs[0].1.is_empty() && runs[0].1 == runs[1].1;
        compared += runs[0].1.len();
    }
    verdict_line(12, "reproducibility", ok, &format!("{compared} CSV files byte-compared across two runs each"));
    assert!(ok);
}
