//! Predicted decay exponents, log-log fits, and pass/fail assembly.
//!
//! Predicted exponents are decay *rates* (positive numbers `k` in
//! `(t+1)^{-k}`); fitted exponents are signed log-log slopes.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::decay_character::DecayCharacterReport;
use crate::error::{Error, Result};
use crate::linear_continuum::LinearDecayCurve;
use crate::solver::TrajectoryRecord;

pub const MIN_FIT_SAMPLES: usize = 10;
/// Fits with a coefficient of determination below this are flagged.
pub const R_SQUARED_FLAG: f64 = 0.99;
/// Difference series below this fraction of the solution count as zero.
pub const DEGENERATE_DIFFERENCE: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_samples: usize,
    pub flagged: bool,
}

/// Least squares of `ln v` against `ln(t + 1)` over samples with `t` in `window`.
pub fn fit_decay_exponent(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    if !(window.0 <= window.1) {
        return Err(Error::InvalidParameter(format!(
            "empty fit window [{}, {}]",
            window.0, window.1
        )));
    }
    let slack = 1e-12 * window.1.abs().max(1.0);
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= window.0 - slack && t <= window.1 + slack)
        .map(|(&t, &v)| {
            if v > 0.0 && v.is_finite() {
                Ok(((t + 1.0).ln(), v.ln()))
            } else {
                Err(Error::InvalidParameter(format!(
                    "fit needs positive values, got {v} at t = {t}"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let n = x.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{n} samples in [{}, {}], need {MIN_FIT_SAMPLES}",
            window.0, window.1
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(&y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples("all fit times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    // A flat series (up to rounding) is fitted exactly.
    let r_squared = if syy <= 1e-24 * n as f64 * my.abs().max(1.0).powi(2) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        exponent: slope,
        intercept,
        window,
        r_squared,
        n_samples: n,
        flagged: r_squared < R_SQUARED_FLAG,
    })
}

fn check_character(r_plus: f64) -> Result<()> {
    if !(r_plus > -1.5) {
        return Err(Error::InvalidParameter(format!(
            "decay character must exceed -3/2, got {r_plus}"
        )));
    }
    Ok(())
}

/// `min{3/2 + r_plus, 5/2}`: decay rate of `||u||^2_{H^1_alpha}` for small data in 3-D.
pub fn predicted_nonlinear_exponent(r_plus: f64) -> Result<f64> {
    check_character(r_plus)?;
    Ok((1.5 + r_plus).min(2.5))
}

/// `min{5/2 + (3/2) r_plus, 5/2}`: decay rate of `||u - u_bar||^2_{H^1_alpha}`.
pub fn predicted_difference_exponent(r_plus: f64) -> Result<f64> {
    check_character(r_plus)?;
    Ok((2.5 + 1.5 * r_plus).min(2.5))
}

/// Guaranteed gap between the difference rate and the slowest possible
/// solution rate, `1 + r/2` for `r <= 0` and `1 - r` on `(0, 1)`. Defined
/// only where the lower bound applies.
pub fn predicted_rate_gap(r: f64) -> Result<f64> {
    if !lower_bound_applicable(r) {
        return Err(Error::InvalidParameter(format!(
            "rate gap needs -3/2 < r < 1, got {r}"
        )));
    }
    Ok(predicted_difference_exponent(r)? - predicted_lower_exponent(r))
}

/// Whether the matching lower bound applies: `-3/2 < r < 1`.
pub fn lower_bound_applicable(r: f64) -> bool {
    r > -1.5 && r < 1.0
}

/// `min{3/2 + r, 5/2}`.
pub fn predicted_lower_exponent(r: f64) -> f64 {
    (1.5 + r).min(2.5)
}

/// `n/2 + r + m`: decay rate of `||D^m u_bar||^2_{H^1_alpha}`.
pub fn predicted_linear_rate(r: f64, n: usize, m: u32) -> f64 {
    n as f64 / 2.0 + r + m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub linear: f64,
    pub torus: f64,
    /// Allowed shortfall of the observed difference-solution rate gap.
    pub gap: f64,
    pub r_squared_flag: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            linear: 0.05,
            torus: 0.2,
            gap: 0.3,
            r_squared_flag: R_SQUARED_FLAG,
        }
    }
}

/// Fit windows; `None` selects the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FitWindows {
    pub linear: Option<(f64, f64)>,
    pub torus: Option<(f64, f64)>,
}

/// `[t_end / 5, min(t_end, t_c / 2)]`, falling back to `[t_end / 5, t_end]`
/// when the crossover comes too early. The flag reports the fallback.
pub fn default_torus_window(t_end: f64, crossover: f64) -> ((f64, f64), bool) {
    let lo = t_end / 5.0;
    let hi = t_end.min(0.5 * crossover);
    if hi > lo {
        ((lo, hi), false)
    } else {
        ((lo, t_end), true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The checked series vanishes identically.
    DegeneratePass,
    /// Reported without a pass/fail decision.
    NoVerdict,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub series: String,
    /// Predicted decay rate (or rate gap, for the gap check).
    pub predicted: Option<f64>,
    pub observed: Option<FitResult>,
    /// Observed decay rate or rate gap compared against `predicted`.
    pub observed_rate: Option<f64>,
    pub tolerance: f64,
    pub window: (f64, f64),
    /// Bound constant used for the domination test, if any.
    pub constant: Option<f64>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub linear_rate: Option<f64>,
    pub nonlinear_rate: Option<f64>,
    pub difference_rate: Option<f64>,
    pub lower_bound_applicable: bool,
    pub lower_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment_id: String,
    pub r_plus: f64,
    pub r_minus: f64,
    pub r_hat: Option<f64>,
    pub predictions: Predictions,
    pub tolerances: Tolerances,
    pub windows: FitWindows,
    pub checks: Vec<CheckOutcome>,
    pub caveats: Vec<String>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn text_table(&self) -> String {
        let mut s = String::new();
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "experiment {}", self.experiment_id);
        let _ = writeln!(
            s,
            "r+ = {:.4}  r- = {:.4}  r = {}",
            self.r_plus,
            self.r_minus,
            fmt_opt(self.r_hat)
        );
        let _ = writeln!(
            s,
            "{:<22} {:<14} {:>10} {:>10} {:>8} {:>8} {:>21}  verdict",
            "check", "series", "predicted", "observed", "tol", "r^2", "window"
        );
        for c in &self.checks {
            let r2 = c.observed.map(|f| format!("{:.4}", f.r_squared)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<22} {:<14} {:>10} {:>10} {:>8.3} {:>8} {:>21}  {:?}",
                c.name,
                c.series,
                fmt_opt(c.predicted),
                fmt_opt(c.observed_rate),
                c.tolerance,
                r2,
                format!("[{:.3e}, {:.3e}]", c.window.0, c.window.1),
                c.verdict
            );
            for note in &c.notes {
                let _ = writeln!(s, "    note: {note}");
            }
        }
        for c in &self.caveats {
            let _ = writeln!(s, "caveat: {c}");
        }
        let _ = writeln!(s, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }

    /// Rows `series,t,observed,predicted_bound` for every bound check with a
    /// constant, over that check's window.
    pub fn write_plot_csv(
        &self,
        trajectory: Option<&TrajectoryRecord>,
        curve: &LinearDecayCurve,
        out: &mut impl Write,
    ) -> std::io::Result<()> {
        writeln!(out, "check,series,t,observed,predicted_bound")?;
        for c in &self.checks {
            let (Some(_), Some(constant)) = (c.predicted, c.constant) else {
                continue;
            };
            let exponent = bound_exponent(c);
            let series: Option<(&[f64], &[f64])> = match (c.series.as_str(), trajectory) {
                ("u_h1alpha_sq", Some(tr)) => Some((&tr.times, &tr.u_h1alpha_sq)),
                ("w_h1alpha_sq", Some(tr)) => Some((&tr.times, &tr.w_h1alpha_sq)),
                ("ubar_h1alpha_sq", _) => Some((&curve.times, &curve.h1alpha_sq)),
                _ => None,
            };
            let Some((times, values)) = series else { continue };
            for (&t, &v) in times.iter().zip(values) {
                if t >= c.window.0 && t <= c.window.1 {
                    writeln!(
                        out,
                        "{},{},{:e},{:e},{:e}",
                        c.name,
                        c.series,
                        t,
                        v,
                        constant * (t + 1.0).powf(-exponent)
                    )?;
                }
            }
        }
        Ok(())
    }
}

// Exponent of the plotted / tested bound curve for a check.
fn bound_exponent(c: &CheckOutcome) -> f64 {
    let rate = c.predicted.unwrap_or(0.0);
    if c.name.starts_with("lower") {
        rate + c.tolerance
    } else {
        rate - c.tolerance
    }
}

fn window_samples<'a>(
    times: &'a [f64],
    values: &'a [f64],
    window: (f64, f64),
) -> impl Iterator<Item = (f64, f64)> + 'a {
    times
        .iter()
        .zip(values)
        .filter(move |(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &v)| (t, v))
}

/// Upper-bound check: the fitted slope is at most `-rate + tol`, and the
/// curve `C (t+1)^{-(rate - tol)}` anchored at the first window sample
/// dominates the series over the window.
fn upper_bound_check(
    name: &str,
    series: &str,
    times: &[f64],
    values: &[f64],
    rate: f64,
    tol: f64,
    window: (f64, f64),
) -> CheckOutcome {
    let mut out = CheckOutcome {
        name: name.into(),
        series: series.into(),
        predicted: Some(rate),
        observed: None,
        observed_rate: None,
        tolerance: tol,
        window,
        constant: None,
        verdict: Verdict::Fail,
        notes: Vec::new(),
    };
    let fit = match fit_decay_exponent(times, values, window) {
        Ok(f) => f,
        Err(e) => {
            out.notes.push(format!("fit failed: {e}"));
            return out;
        }
    };
    out.observed = Some(fit);
    out.observed_rate = Some(-fit.exponent);
    let relaxed = rate - tol;
    let mut samples = window_samples(times, values, window);
    let (t0, v0) = samples.next().expect("fit found samples");
    let constant = v0 * (t0 + 1.0).powf(relaxed);
    out.constant = Some(constant);
    let dominated = std::iter::once((t0, v0))
        .chain(samples)
        .all(|(t, v)| v <= constant * (t + 1.0).powf(-relaxed) * (1.0 + 1e-9));
    let rate_ok = fit.exponent <= -rate + tol;
    if !dominated {
        out.notes.push("bound curve does not dominate the series".into());
    }
    if rate_ok && -fit.exponent > rate + tol {
        out.notes.push("decay is faster than the predicted bound (allowed)".into());
    }
    if fit.flagged {
        out.notes.push(format!("r^2 = {:.4} below flag level", fit.r_squared));
    }
    out.verdict = if rate_ok && dominated { Verdict::Pass } else { Verdict::Fail };
    out
}

/// Lower-bound check: the series never falls below
/// `C (t+1)^{-(rate + tol)}` anchored at the first window sample.
fn lower_bound_check(
    times: &[f64],
    values: &[f64],
    rate: f64,
    tol: f64,
    window: (f64, f64),
) -> CheckOutcome {
    let mut out = CheckOutcome {
        name: "lower_bound".into(),
        series: "u_h1alpha_sq".into(),
        predicted: Some(rate),
        observed: None,
        observed_rate: None,
        tolerance: tol,
        window,
        constant: None,
        verdict: Verdict::Fail,
        notes: Vec::new(),
    };
    let fit = match fit_decay_exponent(times, values, window) {
        Ok(f) => f,
        Err(e) => {
            out.notes.push(format!("fit failed: {e}"));
            return out;
        }
    };
    out.observed = Some(fit);
    out.observed_rate = Some(-fit.exponent);
    let relaxed = rate + tol;
    let mut samples = window_samples(times, values, window);
    let (t0, v0) = samples.next().expect("fit found samples");
    let floor = v0 * (t0 + 1.0).powf(relaxed);
    out.constant = Some(floor);
    let above = std::iter::once((t0, v0))
        .chain(samples)
        .all(|(t, v)| v * (t + 1.0).powf(relaxed) >= floor * (1.0 - 1e-9));
    out.verdict = if above { Verdict::Pass } else { Verdict::Fail };
    if !above {
        out.notes.push("compensated series drops below its floor".into());
    }
    out
}

/// Assembles predicted-versus-observed checks for one set of initial data.
///
/// `trajectory` is optional so purely linear experiments can be verified.
pub fn verify_experiment(
    experiment_id: &str,
    trajectory: Option<&TrajectoryRecord>,
    characters: &DecayCharacterReport,
    linear_curve: &LinearDecayCurve,
    tolerances: &Tolerances,
    windows: &FitWindows,
) -> Result<VerificationReport> {
    if let Some(tr) = trajectory {
        let prov = &tr.provenance;
        if prov.params != linear_curve.params {
            return Err(Error::Provenance(format!(
                "trajectory params {:?} differ from linear curve params {:?}",
                prov.params, linear_curve.params
            )));
        }
        if let Some(profile) = &prov.profile {
            if *profile != linear_curve.profile {
                return Err(Error::Provenance(
                    "trajectory and linear curve come from different profiles".into(),
                ));
            }
        }
    }
    let n = linear_curve.profile.dim;
    let m = linear_curve.order;
    let oscillatory = characters.r_hat.is_none();
    let mut caveats = Vec::new();
    let mut checks = Vec::new();
    let mut windows_used = *windows;

    let linear_rate = characters.r_hat.map(|r| predicted_linear_rate(r, n, m));
    let nonlinear_rate = predicted_nonlinear_exponent(characters.r_plus).ok();
    let difference_rate = predicted_difference_exponent(characters.r_plus).ok();
    let lower_character = characters.r_hat;
    let lower_applicable = lower_character.is_some_and(lower_bound_applicable);
    let lower_rate = lower_character.filter(|_| lower_applicable).map(predicted_lower_exponent);
    if oscillatory {
        caveats.push(format!(
            "r- = {:.3} and r+ = {:.3} differ; fits are reported without a verdict",
            characters.r_minus, characters.r_plus
        ));
    }

    // Linear decay rate on the continuum curve.
    let linear_window = windows.linear.unwrap_or_else(|| linear_curve.default_fit_window());
    windows_used.linear = Some(linear_window);
    {
        let fit = fit_decay_exponent(&linear_curve.times, &linear_curve.h1alpha_sq, linear_window);
        let mut c = CheckOutcome {
            name: "linear_rate".into(),
            series: "ubar_h1alpha_sq".into(),
            predicted: linear_rate,
            observed: fit.as_ref().ok().copied(),
            observed_rate: fit.as_ref().ok().map(|f| -f.exponent),
            tolerance: tolerances.linear,
            window: linear_window,
            constant: None,
            verdict: Verdict::Fail,
            notes: Vec::new(),
        };
        match (&fit, linear_rate) {
            (Err(e), _) => c.notes.push(format!("fit failed: {e}")),
            (Ok(_), None) => c.verdict = Verdict::NoVerdict,
            (Ok(f), Some(rate)) => {
                c.verdict = if (-f.exponent - rate).abs() <= tolerances.linear {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
            }
        }
        checks.push(c);
    }

    if let Some(tr) = trajectory {
        let t_end = tr.times.last().copied().unwrap_or(0.0);
        let window = match windows.torus {
            Some(w) => w,
            None => {
                let (w, fallback) = default_torus_window(t_end, tr.crossover_time);
                if fallback {
                    caveats.push("spectral-gap crossover precedes the default window start".into());
                }
                w
            }
        };
        windows_used.torus = Some(window);
        caveats.push(format!(
            "torus spectral-gap crossover at t = {:.3}; algebraic rates are fitted before it",
            tr.crossover_time
        ));
        if window.1 > tr.crossover_time {
            caveats.push("fit window extends past the spectral-gap crossover".into());
        }
        if let Some(w) = &tr.resolution_warning {
            caveats.push(w.clone());
        }

        let tol = tolerances.torus;
        let mut u_check = match nonlinear_rate {
            Some(rate) => upper_bound_check("upper_bound_solution", "u_h1alpha_sq", &tr.times, &tr.u_h1alpha_sq, rate, tol, window),
            None => no_verdict("upper_bound_solution", "u_h1alpha_sq", tol, window, "character out of range"),
        };
        if oscillatory {
            u_check.verdict = Verdict::NoVerdict;
        }

        let u_max = tr.u_h1alpha_sq.iter().cloned().fold(0.0, f64::max);
        let w_max = tr.w_h1alpha_sq.iter().cloned().fold(0.0, f64::max);
        let degenerate = w_max <= DEGENERATE_DIFFERENCE * u_max;
        let w_starts_at_zero = tr.w_h1alpha_sq.first() == Some(&0.0);

        let mut w_check = if degenerate {
            let mut c = no_verdict("upper_bound_difference", "w_h1alpha_sq", tol, window, "difference vanishes");
            c.predicted = difference_rate;
            c.verdict = Verdict::DegeneratePass;
            c
        } else {
            match difference_rate {
                Some(rate) => upper_bound_check("upper_bound_difference", "w_h1alpha_sq", &tr.times, &tr.w_h1alpha_sq, rate, tol, window),
                None => no_verdict("upper_bound_difference", "w_h1alpha_sq", tol, window, "character out of range"),
            }
        };
        if !w_starts_at_zero {
            w_check.verdict = Verdict::Fail;
            w_check.notes.push("difference does not start at zero".into());
        }
        if oscillatory && w_check.verdict != Verdict::DegeneratePass {
            w_check.verdict = Verdict::NoVerdict;
        }

        // w decays no slower than u, and the rate gap, when r < 1.
        let r_for_gap = characters.r_hat.filter(|&r| lower_bound_applicable(r));
        let mut order_check = no_verdict("difference_ordering", "w_h1alpha_sq", 0.0, window, "");
        order_check.notes.clear();
        let mut gap_check = no_verdict("rate_gap", "w_h1alpha_sq", tolerances.gap, window, "");
        gap_check.notes.clear();
        gap_check.predicted = r_for_gap.and_then(|r| predicted_rate_gap(r).ok());
        match (degenerate, u_check.observed, w_check.observed, r_for_gap) {
            (true, ..) => {
                order_check.verdict = Verdict::DegeneratePass;
                gap_check.verdict = Verdict::DegeneratePass;
            }
            (false, Some(fu), Some(fw), Some(r)) => {
                let gap = fu.exponent - fw.exponent;
                order_check.observed = Some(fw);
                order_check.observed_rate = Some(gap);
                order_check.predicted = Some(0.0);
                order_check.verdict = if fw.exponent <= fu.exponent { Verdict::Pass } else { Verdict::Fail };
                gap_check.observed = Some(fw);
                gap_check.observed_rate = Some(gap);
                let predicted = predicted_rate_gap(r)?;
                gap_check.verdict = if gap >= predicted - tolerances.gap {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                if gap > predicted + tolerances.gap {
                    gap_check.notes.push("gap exceeds the prediction (allowed)".into());
                }
            }
            (false, _, _, None) => {
                order_check.notes.push("r* undefined or >= 1; ordering not asserted".into());
                gap_check.notes.push("r* undefined or >= 1; gap not asserted".into());
            }
            _ => {
                order_check.verdict = Verdict::Fail;
                order_check.notes.push("a fit failed".into());
                gap_check.verdict = Verdict::Fail;
            }
        }

        checks.push(u_check);
        checks.push(w_check);
        checks.push(order_check);
        checks.push(gap_check);

        if let Some(rate) = lower_rate {
            let mut c = lower_bound_check(&tr.times, &tr.u_h1alpha_sq, rate, tol, window);
            if characters.r_plus != characters.r_minus {
                c.notes.push(format!(
                    "lower bound uses r = {:.4}; r+ = {:.4} is used for the upper bounds",
                    lower_character.unwrap_or(f64::NAN),
                    characters.r_plus
                ));
            }
            checks.push(c);
        }
    }

    let pass = checks.iter().all(|c| !c.verdict.is_failure());
    Ok(VerificationReport {
        experiment_id: experiment_id.into(),
        r_plus: characters.r_plus,
        r_minus: characters.r_minus,
        r_hat: characters.r_hat,
        predictions: Predictions {
            linear_rate,
            nonlinear_rate,
            difference_rate,
            lower_bound_applicable: lower_applicable,
            lower_rate,
        },
        tolerances: *tolerances,
        windows: windows_used,
        checks,
        caveats,
        pass,
    })
}

fn no_verdict(name: &str, series: &str, tol: f64, window: (f64, f64), note: &str) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        series: series.into(),
        predicted: None,
        observed: None,
        observed_rate: None,
        tolerance: tol,
        window,
        constant: None,
        verdict: Verdict::NoVerdict,
        notes: vec![note.into()],
    }
}
