//! Experiment runners behind the command-line modes. Each writes its
//! series (CSV), reports (JSON) and the echoed effective config into the
//! output directory and returns an overall verdict.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{write_effective_config, CharacterSource, ExperimentConfig, Mode};
use crate::decay_character::{
    estimate_characters, log_radii, make_data, shell_energy_weighted, shift_by_gradient,
    DecayCharacterReport, EstimatorOptions, ProfileShape, RadialProfile, ShiftReport,
    SpectrumSamples, SpectrumSource, V2Target,
};
use crate::error::{Error, Result};
use crate::fields::snapshot::{read_snapshot, write_snapshot};
use crate::fields::{norm_h1alpha_sq, norm_v2_sq, Grid, SpectralVectorField};
use crate::harness::{verify_experiment, FitResult, VerificationReport};
use crate::linear_continuum::{
    fit_linear_exponent, linear_decay_curve, log_time_grid, predicted_linear_exponent,
    sandwich_constants, LinearDecayCurve, SandwichConstants,
};
use crate::solver::{choose_dt, run_with_observer, DtChoice, SolverConfig, TrajectoryRecord};

/// Result of one experiment (or a whole sweep).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub mode: Mode,
    pub pass: bool,
    /// Set when a run stopped on a numerical failure.
    pub aborted: bool,
    pub summary: String,
    pub output_dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Runs the experiment selected by `config.mode`. Sweeps use `jobs` workers.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    config.validate()?;
    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    match config.mode {
        Mode::LinearDecay => run_linear_decay(config),
        Mode::Simulate => run_simulate(config),
        Mode::DecayCharacter => run_decay_character(config),
        Mode::Compare => run_compare(config),
        Mode::Sweep => run_sweep(config, jobs),
    }
}

// ---------------------------------------------------------------- linear

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOrderReport {
    pub m: u32,
    pub fit: FitResult,
    pub predicted_exponent: Option<f64>,
    pub tolerance: f64,
    pub sandwich: Option<SandwichConstants>,
    pub monotone: bool,
    pub pass: bool,
}

/// Continuum linear curves and fits for each configured derivative order.
pub fn linear_reports(
    config: &ExperimentConfig,
) -> Result<(Vec<LinearDecayCurve>, Vec<LinearOrderReport>)> {
    let profile = config.radial_profile()?;
    let params = config.params();
    let lin = &config.linear;
    let times = log_time_grid(lin.t_min, lin.t_max, lin.per_decade)?;
    let r = profile.low_frequency_exponent();
    let n = profile.dim;
    let mut curves = Vec::new();
    let mut reports = Vec::new();
    for &m in &lin.orders {
        let curve = linear_decay_curve(&profile, &params, &times, m)?;
        let window = config.windows.linear.unwrap_or_else(|| curve.default_fit_window());
        let fit = fit_linear_exponent(&curve, window)?;
        let predicted = r.map(|r| predicted_linear_exponent(r, n, m));
        let sandwich = r.map(|r| sandwich_constants(&curve, r + m as f64, n));
        let monotone = curve.max_relative_increase() <= 1e-9;
        let tol = config.tolerances.linear;
        let rate_ok = predicted.is_none_or(|p| (fit.exponent - p).abs() <= tol);
        let sandwich_ok = sandwich.is_none_or(|s| s.valid);
        reports.push(LinearOrderReport {
            m,
            fit,
            predicted_exponent: predicted,
            tolerance: tol,
            sandwich,
            monotone,
            pass: rate_ok && sandwich_ok && monotone,
        });
        curves.push(curve);
    }
    Ok((curves, reports))
}

fn run_linear_decay(config: &ExperimentConfig) -> Result<Outcome> {
    let dir = &config.output;
    write_effective_config(config, dir)?;
    let (curves, reports) = linear_reports(config)?;
    for curve in &curves {
        write_with(&dir.join(format!("linear_curve_m{}.csv", curve.order)), |w| curve.write_csv(w))?;
    }
    write_json(&dir.join("linear_report.json"), &reports)?;
    let mut summary = String::new();
    for r in &reports {
        summary += &format!(
            "m = {}: fitted exponent {:.4} (predicted {}), r^2 = {:.5}, sandwich {} -> {}\n",
            r.m,
            r.fit.exponent,
            r.predicted_exponent.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
            r.fit.r_squared,
            r.sandwich.map(|s| if s.valid { "valid" } else { "invalid" }).unwrap_or("-"),
            pass_word(r.pass)
        );
    }
    Ok(Outcome {
        mode: Mode::LinearDecay,
        pass: reports.iter().all(|r| r.pass),
        aborted: false,
        summary,
        output_dir: dir.clone(),
    })
}

// -------------------------------------------------------------- simulate

/// Pass/fail summary of the energy law and bound checks of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationChecks {
    pub dt: DtChoice,
    pub v2_norm_initial: f64,
    pub monotone: bool,
    pub balance_error: f64,
    pub balance_ok: bool,
    pub a_priori_ok: bool,
    pub max_step_energy_residual: f64,
    pub step_residual_limit: f64,
    pub step_residual_ok: bool,
    pub lemma1_max_ratio: f64,
    pub lemma1_ok: bool,
    pub difference_starts_at_zero: bool,
    pub triangle_ok: bool,
    pub resolution_warning: Option<String>,
    pub pass: bool,
}

impl SimulationChecks {
    pub fn evaluate(rec: &TrajectoryRecord, dt: DtChoice, v2_norm_initial: f64) -> Self {
        let h = &rec.u_h1alpha_sq;
        let h0 = h.first().copied().unwrap_or(0.0);
        let monotone = h.windows(2).all(|w| w[1] <= w[0]);
        let balance_error = rec.cumulative_balance_error();
        let a_priori_ok = h.iter().all(|v| v.sqrt() <= h0.sqrt() * (1.0 + 1e-12));
        let step_dt = rec.provenance.dt;
        let step_residual_limit = 10.0 * step_dt * step_dt;
        let step_residual_ok = rec.max_step_energy_residual < step_residual_limit;
        let lemma1_ok = rec.lemma1_max_over_run <= 1.0 + crate::fields::LEMMA_BOUND_SLACK;
        let difference_starts_at_zero = rec.w_h1alpha_sq.first() == Some(&0.0);
        let triangle_ok = (0..rec.times.len()).all(|j| {
            let bound = (rec.u_h1alpha_sq[j].sqrt() + rec.ubar_h1alpha_sq[j].sqrt()).powi(2);
            rec.w_h1alpha_sq[j] <= bound * (1.0 + 1e-12)
        });
        let balance_ok = balance_error < 1e-6;
        let pass = monotone
            && balance_ok
            && a_priori_ok
            && step_residual_ok
            && lemma1_ok
            && difference_starts_at_zero
            && triangle_ok;
        SimulationChecks {
            dt,
            v2_norm_initial,
            monotone,
            balance_error,
            balance_ok,
            a_priori_ok,
            max_step_energy_residual: rec.max_step_energy_residual,
            step_residual_limit,
            step_residual_ok,
            lemma1_max_ratio: rec.lemma1_max_over_run,
            lemma1_ok,
            difference_starts_at_zero,
            triangle_ok,
            resolution_warning: rec.resolution_warning.clone(),
            pass,
        }
    }
}

/// Generates the initial data of a simulate / compare config.
pub fn initial_data(config: &ExperimentConfig) -> Result<(RadialProfile, SpectralVectorField)> {
    let profile = config.radial_profile()?;
    let grid = Grid::from_spec(config.grid)?;
    let target = config.profile.target_v2_norm.map(|norm| V2Target {
        norm,
        alpha: config.alpha,
    });
    let u0 = make_data(&profile, &grid, config.effective_seed(), target)?;
    Ok((profile, u0))
}

/// Runs the nonlinear solver for `config`, writing snapshots into `dir`.
/// Returns the record, the checks and the config with the step actually used.
pub fn simulate(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<(TrajectoryRecord, SimulationChecks, ExperimentConfig)> {
    let (profile, u0) = initial_data(config)?;
    let params = config.params();
    let choice = choose_dt(config.solver.dt, &u0, &params);
    let mut effective = config.clone();
    if choice.adjusted {
        log::warn!(
            "requested dt {:?} exceeds half the stability bound {:.4e}; using {:.4e}",
            choice.requested,
            choice.stability_bound,
            choice.dt
        );
        effective.solver.requested_dt = choice.requested;
    }
    effective.solver.dt = Some(choice.dt);
    let solver = SolverConfig {
        dt: choice.dt,
        t_end: config.solver.t_end,
        output_stride: config.solver.output_stride,
        scheme: config.solver.scheme,
        diagnostics_stride: config.solver.diagnostics_stride,
    };
    let mut pending: Vec<f64> = config.solver.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let alpha = config.alpha;
    let mut rec = run_with_observer(&u0, &params, &solver, |_, t, u| {
        while pending.last().is_some_and(|&ts| ts <= t + 1e-12) {
            pending.pop();
            let path = dir.join(format!("snapshot_t{t:010.4}.bin"));
            write_snapshot(&path, &u.to_real()?, alpha, t)?;
        }
        Ok(())
    })?;
    rec.provenance.profile = Some(profile);
    rec.provenance.seed = Some(config.effective_seed());
    let v2 = norm_v2_sq(&u0, alpha)?.sqrt();
    let checks = SimulationChecks::evaluate(&rec, choice, v2);
    Ok((rec, checks, effective))
}

fn simulation_summary(checks: &SimulationChecks) -> String {
    let mut s = format!(
        "dt = {:.4e}{}; ||u0||_V2 = {:.4e}\n",
        checks.dt.dt,
        if checks.dt.adjusted { " (adjusted)" } else { "" },
        checks.v2_norm_initial
    );
    s += &format!("energy nonincreasing: {}\n", pass_word(checks.monotone));
    s += &format!(
        "cumulative balance error {:.3e}: {}\n",
        checks.balance_error,
        pass_word(checks.balance_ok)
    );
    s += &format!("a priori bound: {}\n", pass_word(checks.a_priori_ok));
    s += &format!(
        "per-step energy residual {:.3e} (limit {:.3e}): {}\n",
        checks.max_step_energy_residual,
        checks.step_residual_limit,
        pass_word(checks.step_residual_ok)
    );
    s += &format!(
        "nonlinear Fourier bound ratio {:.4e}: {}\n",
        checks.lemma1_max_ratio,
        pass_word(checks.lemma1_ok)
    );
    s += &format!(
        "difference starts at zero: {}; triangle bound: {}\n",
        pass_word(checks.difference_starts_at_zero),
        pass_word(checks.triangle_ok)
    );
    if let Some(w) = &checks.resolution_warning {
        s += &format!("warning: {w}\n");
    }
    s
}

fn run_simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let dir = &config.output;
    let (rec, checks, effective) = simulate(config, dir)?;
    write_effective_config(&effective, dir)?;
    write_with(&dir.join("trajectory.csv"), |w| rec.write_csv(w))?;
    write_json(&dir.join("simulation_checks.json"), &checks)?;
    Ok(Outcome {
        mode: Mode::Simulate,
        pass: checks.pass,
        aborted: false,
        summary: simulation_summary(&checks),
        output_dir: dir.clone(),
    })
}

// -------------------------------------------------------- decay character

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterExperimentReport {
    pub source: CharacterSource,
    pub expected_r: Option<f64>,
    pub tolerance: f64,
    pub report: DecayCharacterReport,
    pub shift: Option<ShiftReport>,
    pub pass: bool,
}

fn is_oscillatory(profile: &RadialProfile) -> bool {
    matches!(profile.shape, ProfileShape::Oscillatory { .. })
}

/// Shell energies (unweighted and gradient-weighted) for the configured source.
pub fn character_samples(
    config: &ExperimentConfig,
) -> Result<(SpectrumSamples, SpectrumSamples, EstimatorOptions, Option<RadialProfile>)> {
    let c = &config.decay_character;
    match c.source {
        CharacterSource::Profile => {
            let profile = config.radial_profile()?;
            let hi = c.radius_max.unwrap_or(0.5 * profile.cutoff_radius);
            let lo = c.radius_min.unwrap_or_else(|| match profile.shape {
                // Four times the periods covered by the indicator quartile.
                ProfileShape::Oscillatory { period_decades, .. } => {
                    hi * 10f64.powf(-12.0 * period_decades)
                }
                _ => hi * 1e-4,
            });
            let decades = (hi / lo).log10();
            let count = c.samples.max((16.0 * decades).ceil() as usize + 1);
            let radii = log_radii(hi, lo, count);
            let base = shell_energy_weighted(SpectrumSource::Profile(&profile), &radii, 0)?;
            let grad = shell_energy_weighted(SpectrumSource::Profile(&profile), &radii, 1)?;
            Ok((base, grad, c.estimator.unwrap_or_default(), Some(profile)))
        }
        CharacterSource::Grid | CharacterSource::Snapshot => {
            let (field, profile) = if c.source == CharacterSource::Grid {
                let (profile, u0) = initial_data(config)?;
                (u0, Some(profile))
            } else {
                let path = c.snapshot_path.as_ref().expect("validated");
                let (_, real) = read_snapshot(path)?;
                (real.to_spectral(), None)
            };
            let grid = field.grid().clone();
            let spacing = grid.wavenumber_spacing();
            let hi = c.radius_max.unwrap_or_else(|| match &profile {
                Some(p) => p.cutoff_radius,
                None => 0.5 * grid.dealias_cutoff(),
            });
            let lo = c.radius_min.unwrap_or(2.0 * spacing);
            if !(hi > lo) {
                return Err(Error::ResolutionLimited {
                    radius: hi,
                    limit: lo,
                });
            }
            let radii = log_radii(hi, lo, c.samples);
            let base = shell_energy_weighted(SpectrumSource::Field(&field), &radii, 0)?;
            let grad = shell_energy_weighted(SpectrumSource::Field(&field), &radii, 1)?;
            Ok((base, grad, c.estimator.unwrap_or_else(EstimatorOptions::lattice), profile))
        }
    }
}

fn write_shell_csv(path: &Path, base: &SpectrumSamples, grad: &SpectrumSamples) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "rho,shell_energy,grad_shell_energy")?;
        for j in 0..base.radii.len() {
            writeln!(w, "{:e},{:e},{:e}", base.radii[j], base.shell_energy[j], grad.shell_energy[j])?;
        }
        Ok(())
    })
}

fn run_decay_character(config: &ExperimentConfig) -> Result<Outcome> {
    let dir = &config.output;
    write_effective_config(config, dir)?;
    let c = &config.decay_character;
    let (base, grad, opts, profile) = character_samples(config)?;
    write_shell_csv(&dir.join("shell_energy.csv"), &base, &grad)?;
    let report = estimate_characters(&base, &opts)?;
    let shift = match shift_by_gradient(&base, &grad, &opts, c.shift_tolerance) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("shift check skipped: {e}");
            None
        }
    };
    let expected_r = profile.as_ref().and_then(|p| p.low_frequency_exponent());
    let tolerance = c.tolerance.unwrap_or(match c.source {
        CharacterSource::Profile => 0.05,
        _ => 0.15,
    });
    let oscillatory = profile.as_ref().is_some_and(is_oscillatory);
    let character_ok = if oscillatory {
        report.r_hat.is_none()
    } else {
        match (expected_r, report.r_hat) {
            (Some(r), Some(est)) => (est - r).abs() <= tolerance,
            (Some(_), None) => false,
            (None, _) => true,
        }
    };
    let shift_ok = shift.and_then(|s| s.consistent).unwrap_or(true);
    let pass = character_ok && shift_ok;
    let full = CharacterExperimentReport {
        source: c.source,
        expected_r,
        tolerance,
        report: report.clone(),
        shift,
        pass,
    };
    write_json(&dir.join("decay_character_report.json"), &full)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
    let mut summary = format!(
        "r_hat = {}, r+ = {:.4}, r- = {:.4}, P_r ~ {:.4e} (expected r {})\n",
        fmt(report.r_hat),
        report.r_plus,
        report.r_minus,
        report.p_r_estimate,
        fmt(expected_r)
    );
    if let Some(s) = shift {
        summary += &format!("gradient shift: difference {} (expected {})\n", fmt(s.difference), s.shift);
    }
    summary += &format!("{}\n", pass_word(pass));
    Ok(Outcome {
        mode: Mode::DecayCharacter,
        pass,
        aborted: false,
        summary,
        output_dir: dir.clone(),
    })
}

// ---------------------------------------------------------------- compare

/// Simulation, continuum characters and linear curve, assembled into a
/// [`VerificationReport`].
pub fn compare(config: &ExperimentConfig, dir: &Path) -> Result<(VerificationReport, SimulationChecks, TrajectoryRecord, LinearDecayCurve, ExperimentConfig)> {
    let (rec, checks, effective) = simulate(config, dir)?;
    let mut char_config = config.clone();
    char_config.decay_character.source = CharacterSource::Profile;
    let (base, _, opts, _) = character_samples(&char_config)?;
    let characters = estimate_characters(&base, &opts)?;
    let profile = config.radial_profile()?;
    let lin = &config.linear;
    let times = log_time_grid(lin.t_min, lin.t_max, lin.per_decade)?;
    let curve = linear_decay_curve(&profile, &config.params(), &times, 0)?;
    let id = format!(
        "compare r={} alpha={} mu={} seed={}",
        profile.low_frequency_exponent().map(|r| r.to_string()).unwrap_or_else(|| "?".into()),
        config.alpha,
        config.mu,
        config.effective_seed()
    );
    let report = verify_experiment(&id, Some(&rec), &characters, &curve, &config.tolerances, &config.windows)?;
    Ok((report, checks, rec, curve, effective))
}

fn run_compare(config: &ExperimentConfig) -> Result<Outcome> {
    let dir = &config.output;
    let (report, checks, rec, curve, effective) = compare(config, dir)?;
    write_effective_config(&effective, dir)?;
    write_with(&dir.join("trajectory.csv"), |w| rec.write_csv(w))?;
    write_with(&dir.join("linear_curve_m0.csv"), |w| curve.write_csv(w))?;
    write_json(&dir.join("simulation_checks.json"), &checks)?;
    std::fs::write(dir.join("verification_report.json"), report.to_json()? + "\n")
        .map_err(|e| Error::io(dir.join("verification_report.json"), e))?;
    let table = report.text_table();
    std::fs::write(dir.join("verification_table.txt"), &table)
        .map_err(|e| Error::io(dir.join("verification_table.txt"), e))?;
    write_with(&dir.join("verification_plot.csv"), |w| report.write_plot_csv(Some(&rec), &curve, w))?;
    Ok(Outcome {
        mode: Mode::Compare,
        pass: report.pass && checks.pass,
        aborted: false,
        summary: simulation_summary(&checks) + &table,
        output_dir: dir.clone(),
    })
}

// ------------------------------------------------------------------ sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
    pub mode: Mode,
    pub pass: bool,
    pub aborted: bool,
    pub error: Option<String>,
    pub output_dir: PathBuf,
}

fn run_sweep(config: &ExperimentConfig, jobs: usize) -> Result<Outcome> {
    let dir = &config.output;
    write_effective_config(config, dir)?;
    let points = config.sweep_points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, point)| {
                let result = run_experiment(point, 1);
                let (pass, aborted, error) = match &result {
                    Ok(o) => (o.pass, o.aborted, None),
                    Err(e @ Error::NumericalAbort { .. }) => (false, true, Some(e.to_string())),
                    Err(e) => (false, false, Some(e.to_string())),
                };
                SweepRow {
                    index,
                    alpha: point.alpha,
                    mu: point.mu,
                    r: point.profile.r.unwrap_or(f64::NAN),
                    mode: point.mode,
                    pass,
                    aborted,
                    error,
                    output_dir: point.output.clone(),
                }
            })
            .collect()
    });
    write_with(&dir.join("sweep_summary.csv"), |w| {
        writeln!(w, "index,alpha,mu,r,mode,pass,aborted,error")?;
        for row in &rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{},{},{},{}",
                row.index,
                row.alpha,
                row.mu,
                row.r,
                row.mode.name(),
                row.pass,
                row.aborted,
                row.error.as_deref().unwrap_or("").replace(',', ";")
            )?;
        }
        Ok(())
    })?;
    write_json(&dir.join("sweep_summary.json"), &rows)?;
    let mut summary = String::new();
    for row in &rows {
        summary += &format!(
            "{:>3}  alpha = {:<8} mu = {:<8} r = {:<6} {}{}\n",
            row.index,
            row.alpha,
            row.mu,
            row.r,
            pass_word(row.pass),
            row.error.as_ref().map(|e| format!(" ({e})")).unwrap_or_default()
        );
    }
    Ok(Outcome {
        mode: Mode::Sweep,
        pass: rows.iter().all(|r| r.pass),
        aborted: rows.iter().any(|r| r.aborted),
        summary,
        output_dir: dir.clone(),
    })
}

/// `||u||^2_{H^1_alpha}` of the data a simulate config would start from.
pub fn initial_energy(config: &ExperimentConfig) -> Result<f64> {
    let (_, u0) = initial_data(config)?;
    Ok(norm_h1alpha_sq(&u0, config.alpha))
}
