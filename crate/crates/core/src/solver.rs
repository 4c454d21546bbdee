//! Integrating-factor Runge-Kutta time stepping of the full system in
//! Leray-projected spectral form,
//! `d/dt u_hat = M(k) u_hat + (1 + alpha |k|^2)^{-1} P G(u)`,
//! with the linear solution `u_bar` and the difference `w = u - u_bar`
//! evolved alongside.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    lemma1_ratio, nonlinear_term_unchecked, norm_grad_l2_sq, norm_h1alpha_sq, norm_l2_sq,
    GridSpec, HelmholtzDirection, SimParams, SpectralVectorField, DIVERGENCE_TOLERANCE,
};
use crate::linear_grid::{spectral_gap_crossover_time, PropagatorTable};

/// Tail energy fraction above which a run is flagged as under-resolved.
pub const RESOLUTION_TAIL_LIMIT: f64 = 1e-8;
/// Tail modes are those with some `|k_i|` above this fraction of the band edge.
pub const RESOLUTION_TAIL_START: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    IntegratingFactorRk4,
    IntegratingFactorRk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `output_stride` steps (plus the final step).
    pub output_stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    /// Evaluate the nonlinear Fourier bound every `diagnostics_stride` steps.
    pub diagnostics_stride: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.output_stride == 0 || self.diagnostics_stride == 0 {
            return Err(Error::InvalidParameter("strides must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps and the step actually taken: `t_end` is divided
    /// evenly into steps no longer than `dt`.
    pub fn discretization(&self) -> (usize, f64) {
        let steps = (self.t_end / self.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }
}

/// Advective step bound `min(1, alpha/mu) * L / (N * U0)`, with `U0` the
/// largest initial speed. Infinite for zero data.
pub fn stability_bound(u0: &SpectralVectorField, params: &SimParams) -> f64 {
    let grid = u0.grid();
    let u_max = u0.to_real_unchecked().max_magnitude();
    if u_max == 0.0 {
        return f64::INFINITY;
    }
    let dx = grid.box_length() / grid.n_points() as f64;
    (params.alpha / params.mu).min(1.0) * dx / u_max
}

/// Default step: a tenth of [`stability_bound`], capped at
/// `0.25 * min(1, alpha/mu)` so the linear factors stay well resolved for
/// very small data.
pub fn default_dt(u0: &SpectralVectorField, params: &SimParams) -> f64 {
    let cap = 0.25 * (params.alpha / params.mu).min(1.0);
    (0.1 * stability_bound(u0, params)).min(cap)
}

/// Outcome of checking a requested step against the stability heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtChoice {
    pub requested: Option<f64>,
    pub dt: f64,
    pub stability_bound: f64,
    pub adjusted: bool,
}

/// Uses `requested` when it respects `dt <= 0.5 * bound`, otherwise falls
/// back to [`default_dt`] and marks the choice as adjusted.
pub fn choose_dt(requested: Option<f64>, u0: &SpectralVectorField, params: &SimParams) -> DtChoice {
    let bound = stability_bound(u0, params);
    match requested {
        Some(dt) if dt > 0.0 && dt <= 0.5 * bound => DtChoice {
            requested,
            dt,
            stability_bound: bound,
            adjusted: false,
        },
        Some(_) => DtChoice {
            requested,
            dt: default_dt(u0, params),
            stability_bound: bound,
            adjusted: true,
        },
        None => DtChoice {
            requested,
            dt: default_dt(u0, params),
            stability_bound: bound,
            adjusted: false,
        },
    }
}

fn check_input(uh: &SpectralVectorField) -> Result<()> {
    if uh.dim() != 3 {
        return Err(Error::UnsupportedDimension(uh.dim()));
    }
    uh.require_divergence_free(DIVERGENCE_TOLERANCE)
}

// (1 + alpha |k|^2)^{-1} P G(u).
fn nonlinear_part(uh: &SpectralVectorField, params: &SimParams) -> SpectralVectorField {
    nonlinear_term_unchecked(uh, params, true).helmholtz_weight(params.alpha, HelmholtzDirection::Inverse)
}

/// `M(k) u_hat + (1 + alpha |k|^2)^{-1} P G(u)`.
pub fn rhs(uh: &SpectralVectorField, params: &SimParams) -> Result<SpectralVectorField> {
    check_input(uh)?;
    let k2 = uh.grid().k2_all();
    let linear = uh.map_modes(|m, z| z * params.multiplier(k2[m]));
    linear.add_scaled(&nonlinear_part(uh, params), 1.0)
}

/// Propagator tables for one step size, reused across steps.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: SimParams,
    scheme: Scheme,
    dt: f64,
    full: PropagatorTable,
    half: PropagatorTable,
}

impl Stepper {
    pub fn new(grid: Arc<crate::fields::Grid>, params: SimParams, dt: f64, scheme: Scheme) -> Result<Self> {
        Ok(Stepper {
            params,
            scheme,
            dt,
            full: PropagatorTable::new(grid.clone(), params, dt)?,
            half: PropagatorTable::new(grid, params, 0.5 * dt)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn propagator(&self) -> &PropagatorTable {
        &self.full
    }

    /// Advances one step without input validation.
    pub fn advance(&self, u: &SpectralVectorField) -> SpectralVectorField {
        let (p, dt) = (&self.params, self.dt);
        let (e, eh) = (&self.full, &self.half);
        let lin = |a: &SpectralVectorField, b: &SpectralVectorField, s: f64| {
            a.add_scaled(b, s).expect("fields share a grid")
        };
        let mut out = match self.scheme {
            Scheme::IntegratingFactorRk4 => {
                let k1 = nonlinear_part(u, p);
                let eu = e.apply(u);
                let ehu = eh.apply(u);
                let a = eh.apply(&lin(u, &k1, 0.5 * dt));
                let k2 = nonlinear_part(&a, p);
                let b = lin(&ehu, &k2, 0.5 * dt);
                let k3 = nonlinear_part(&b, p);
                let c = lin(&eu, &eh.apply(&k3), dt);
                let k4 = nonlinear_part(&c, p);
                let mid = eh.apply(&lin(&k2, &k3, 1.0));
                let sum = lin(&lin(&e.apply(&k1), &mid, 2.0), &k4, 1.0);
                lin(&eu, &sum, dt / 6.0)
            }
            Scheme::IntegratingFactorRk2 => {
                let k1 = nonlinear_part(u, p);
                let a = e.apply(&lin(u, &k1, dt));
                let k2 = nonlinear_part(&a, p);
                let sum = lin(&e.apply(&k1), &k2, 1.0);
                lin(&e.apply(u), &sum, 0.5 * dt)
            }
        };
        out.dealias();
        out.zero_mean();
        out
    }
}

/// One step of the configured scheme.
pub fn step(
    uh: &SpectralVectorField,
    params: &SimParams,
    config: &SolverConfig,
) -> Result<SpectralVectorField> {
    check_input(uh)?;
    config.validate()?;
    let out = Stepper::new(uh.grid().clone(), *params, config.dt, config.scheme)?.advance(uh);
    if out.has_non_finite() {
        return Err(Error::NumericalAbort {
            time: config.dt,
            reason: "non-finite coefficients after one step".into(),
        });
    }
    Ok(out)
}

/// What produced a trajectory, checked by the verification harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub params: SimParams,
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    /// Filled in by callers that generated the data from a profile.
    pub profile: Option<crate::decay_character::RadialProfile>,
    pub seed: Option<u64>,
}

/// Time series of a run; all vectors are aligned with `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub u_l2_sq: Vec<f64>,
    pub u_grad_l2_sq: Vec<f64>,
    pub u_h1alpha_sq: Vec<f64>,
    pub ubar_h1alpha_sq: Vec<f64>,
    pub w_l2_sq: Vec<f64>,
    pub w_grad_l2_sq: Vec<f64>,
    pub w_h1alpha_sq: Vec<f64>,
    /// `|h(t_{j+1}) - h(t_j) + D_j| / D_j` for the step ending at each row,
    /// where `h` is the `H^1_alpha` energy and `D_j` the dissipation over the step.
    pub energy_residuals: Vec<f64>,
    /// Present on rows that coincide with a diagnostic step.
    pub lemma1_max_ratios: Vec<Option<f64>>,
    /// `2 mu int_0^t ||grad u||^2 ds`.
    pub dissipated_energy_cumulative: Vec<f64>,
    /// Largest per-step energy residual over every step, recorded or not.
    pub max_step_energy_residual: f64,
    /// Largest bound ratio over every diagnostic step.
    pub lemma1_max_over_run: f64,
    pub lemma1_evaluations: usize,
    pub max_tail_fraction: f64,
    pub resolution_warning: Option<String>,
    pub crossover_time: f64,
    pub provenance: RunProvenance,
}

impl TrajectoryRecord {
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "t,u_l2_sq,u_grad_l2_sq,u_h1alpha_sq,ubar_h1alpha_sq,w_l2_sq,w_grad_l2_sq,w_h1alpha_sq,energy_residual,lemma1_max_ratio"
        )?;
        for j in 0..self.times.len() {
            let lemma = self.lemma1_max_ratios[j].map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                self.times[j],
                self.u_l2_sq[j],
                self.u_grad_l2_sq[j],
                self.u_h1alpha_sq[j],
                self.ubar_h1alpha_sq[j],
                self.w_l2_sq[j],
                self.w_grad_l2_sq[j],
                self.w_h1alpha_sq[j],
                self.energy_residuals[j],
                lemma
            )?;
        }
        Ok(())
    }

    /// `|h(t) + dissipated(t) - h(0)| / h(0)` at the last row.
    pub fn cumulative_balance_error(&self) -> f64 {
        let (Some(&h0), Some(&h1), Some(&d)) = (
            self.u_h1alpha_sq.first(),
            self.u_h1alpha_sq.last(),
            self.dissipated_energy_cumulative.last(),
        ) else {
            return 0.0;
        };
        if h0 == 0.0 {
            return (h1 + d).abs();
        }
        (h1 + d - h0).abs() / h0
    }
}

// Dissipation over one step, mode by mode: the logarithmic mean of the
// end-point rates, exact when a mode decays exponentially.
fn step_dissipation(a: &SpectralVectorField, b: &SpectralVectorField, mu: f64, dt: f64) -> f64 {
    let grid = a.grid();
    let k2 = grid.k2_all();
    let mut total = 0.0;
    for m in 1..grid.len() {
        if k2[m] == 0.0 {
            continue;
        }
        let ga: f64 = a.components().iter().map(|c| c[m].norm_sqr()).sum::<f64>();
        let gb: f64 = b.components().iter().map(|c| c[m].norm_sqr()).sum::<f64>();
        let mean = if ga == gb || ga == 0.0 || gb == 0.0 {
            0.5 * (ga + gb)
        } else {
            (ga - gb) / (ga / gb).ln()
        };
        total += 2.0 * mu * k2[m] * mean;
    }
    dt * total / grid.volume()
}

fn tail_fraction(u: &SpectralVectorField) -> f64 {
    let grid = u.grid();
    let edge = RESOLUTION_TAIL_START * grid.dealias_cutoff();
    let (mut tail, mut total) = (0.0, 0.0);
    for m in 0..grid.len() {
        let e: f64 = u.components().iter().map(|c| c[m].norm_sqr()).sum();
        total += e;
        if grid.wavevector(m).iter().any(|k| k.abs() > edge) {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

fn relative_residual(h0: f64, h1: f64, dissipated: f64) -> f64 {
    if dissipated > 0.0 {
        (h1 - h0 + dissipated).abs() / dissipated
    } else {
        (h1 - h0).abs()
    }
}

/// Integrates from `u0` to `config.t_end`.
pub fn run(u0: &SpectralVectorField, params: &SimParams, config: &SolverConfig) -> Result<TrajectoryRecord> {
    run_with_observer(u0, params, config, |_, _, _| Ok(()))
}

/// As [`run`], calling `observer(step, t, u)` after the initial state and
/// after every step.
pub fn run_with_observer(
    u0: &SpectralVectorField,
    params: &SimParams,
    config: &SolverConfig,
    mut observer: impl FnMut(usize, f64, &SpectralVectorField) -> Result<()>,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    config.validate()?;
    check_input(u0)?;
    if !u0.is_dealiased() {
        return Err(Error::InvalidParameter(
            "initial data must lie in the two-thirds band".into(),
        ));
    }
    let grid = u0.grid().clone();
    let (steps, dt) = config.discretization();
    let stepper = Stepper::new(grid.clone(), *params, dt, config.scheme)?;
    let alpha = params.alpha;

    let mut u = u0.clone();
    u.zero_mean();
    let mut ubar = u.clone();
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        u_l2_sq: Vec::new(),
        u_grad_l2_sq: Vec::new(),
        u_h1alpha_sq: Vec::new(),
        ubar_h1alpha_sq: Vec::new(),
        w_l2_sq: Vec::new(),
        w_grad_l2_sq: Vec::new(),
        w_h1alpha_sq: Vec::new(),
        energy_residuals: Vec::new(),
        lemma1_max_ratios: Vec::new(),
        dissipated_energy_cumulative: Vec::new(),
        max_step_energy_residual: 0.0,
        lemma1_max_over_run: 0.0,
        lemma1_evaluations: 0,
        max_tail_fraction: 0.0,
        resolution_warning: None,
        crossover_time: spectral_gap_crossover_time(&grid, params),
        provenance: RunProvenance {
            params: *params,
            grid: grid.spec(),
            scheme: config.scheme,
            dt,
            steps,
            profile: None,
            seed: None,
        },
    };

    let lemma_at = |u: &SpectralVectorField| lemma1_ratio(u, &nonlinear_term_unchecked(u, params, false), params).max_ratio;
    let record = |rec: &mut TrajectoryRecord,
                      t: f64,
                      u: &SpectralVectorField,
                      ubar: &SpectralVectorField,
                      residual: f64,
                      lemma: Option<f64>,
                      dissipated: f64| {
        let w = u.sub(ubar).expect("fields share a grid");
        let (ul2, ugrad) = (norm_l2_sq(u), norm_grad_l2_sq(u));
        let (wl2, wgrad) = (norm_l2_sq(&w), norm_grad_l2_sq(&w));
        rec.times.push(t);
        rec.u_l2_sq.push(ul2);
        rec.u_grad_l2_sq.push(ugrad);
        rec.u_h1alpha_sq.push(ul2 + alpha * ugrad);
        rec.ubar_h1alpha_sq.push(norm_h1alpha_sq(ubar, alpha));
        rec.w_l2_sq.push(wl2);
        rec.w_grad_l2_sq.push(wgrad);
        rec.w_h1alpha_sq.push(wl2 + alpha * wgrad);
        rec.energy_residuals.push(residual);
        rec.lemma1_max_ratios.push(lemma);
        rec.dissipated_energy_cumulative.push(dissipated);
    };

    let mut dissipated = 0.0;
    let lemma0 = lemma_at(&u);
    rec.lemma1_max_over_run = lemma0;
    rec.lemma1_evaluations = 1;
    rec.max_tail_fraction = tail_fraction(&u);
    record(&mut rec, 0.0, &u, &ubar, 0.0, Some(lemma0), 0.0);
    observer(0, 0.0, &u)?;

    let mut h = norm_h1alpha_sq(&u, alpha);
    for s in 1..=steps {
        let t = s as f64 * dt;
        let next = stepper.advance(&u);
        if next.has_non_finite() {
            return Err(Error::NumericalAbort {
                time: t,
                reason: "non-finite coefficients".into(),
            });
        }
        ubar = stepper.propagator().apply(&ubar);
        let d = step_dissipation(&u, &next, params.mu, dt);
        let h_next = norm_h1alpha_sq(&next, alpha);
        if h_next > h * (1.0 + 1e-6) {
            return Err(Error::NumericalAbort {
                time: t,
                reason: format!("energy grew from {h:.6e} to {h_next:.6e}"),
            });
        }
        let residual = relative_residual(h, h_next, d);
        rec.max_step_energy_residual = rec.max_step_energy_residual.max(residual);
        dissipated += d;
        h = h_next;
        u = next;

        let lemma = (s % config.diagnostics_stride == 0).then(|| lemma_at(&u));
        if let Some(v) = lemma {
            rec.lemma1_max_over_run = rec.lemma1_max_over_run.max(v);
            rec.lemma1_evaluations += 1;
        }
        if s % config.output_stride == 0 || s == steps {
            rec.max_tail_fraction = rec.max_tail_fraction.max(tail_fraction(&u));
            record(&mut rec, t, &u, &ubar, residual, lemma, dissipated);
        }
        observer(s, t, &u)?;
    }
    if rec.max_tail_fraction > RESOLUTION_TAIL_LIMIT {
        let msg = format!(
            "tail energy fraction {:.3e} exceeds {RESOLUTION_TAIL_LIMIT:.0e}; the run may be under-resolved",
            rec.max_tail_fraction
        );
        log::warn!("{msg}");
        rec.resolution_warning = Some(msg);
    }
    Ok(rec)
}
