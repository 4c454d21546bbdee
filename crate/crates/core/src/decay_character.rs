//! Decay indicators and (generalized) decay characters of initial data.
//!
//! Everything here works on shell energies `S(rho) = int_{B(rho)} |v_hat|^2`:
//! either computed by quadrature from a [`RadialProfile`], or summed over
//! the Fourier lattice of a [`SpectralVectorField`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{norm_v2_sq, Grid, SpectralVectorField};
use crate::quadrature::{integrate, integrate_from_zero, QuadOptions};

/// Indicator values above this are reported as infinite.
pub const P_SENTINEL: f64 = 1e12;

/// Surface area of the unit sphere in `R^n` (`n = 2, 3`).
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n),
    }
}

// Gamma(n/2) for integer n >= 1.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 1e-9 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Low-frequency shape of `|v_hat(xi)|` as a function of `rho = |xi|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileShape {
    /// `rho^r`.
    PowerLaw { r: f64 },
    /// Local log-slope `d ln A / d ln rho` oscillating between `r_lo` and
    /// `r_hi` as `mid + half_gap * sin(2 pi ln(rho) / period)`, with the
    /// period given in decades of `rho`.
    Oscillatory {
        r_lo: f64,
        r_hi: f64,
        period_decades: f64,
    },
    /// Power-law surrogate for `L^p` data, `r = -n (1 - 1/p)`.
    LpLike { p: f64 },
    /// Log-log interpolation of `(rho, A)` knots, extended by the end slopes.
    Custom { knots: Vec<[f64; 2]> },
}

/// Radially symmetric spectrum amplitude `A(rho)` defining data on `R^n`:
/// `amplitude * shape(rho)` up to `cutoff_radius`, a `cos^2` taper of width
/// `smoothing_width`, and zero beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialProfile {
    pub shape: ProfileShape,
    pub cutoff_radius: f64,
    pub smoothing_width: f64,
    pub amplitude: f64,
    pub dim: usize,
}

impl RadialProfile {
    pub fn power_law(r: f64, dim: usize) -> Self {
        RadialProfile {
            shape: ProfileShape::PowerLaw { r },
            cutoff_radius: 1.0,
            smoothing_width: 0.5,
            amplitude: 1.0,
            dim,
        }
    }

    pub fn oscillatory(r_lo: f64, r_hi: f64, period_decades: f64, dim: usize) -> Self {
        RadialProfile {
            shape: ProfileShape::Oscillatory {
                r_lo,
                r_hi,
                period_decades,
            },
            ..Self::power_law(0.0, dim)
        }
    }

    pub fn with_cutoff(mut self, cutoff_radius: f64, smoothing_width: f64) -> Self {
        self.cutoff_radius = cutoff_radius;
        self.smoothing_width = smoothing_width;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if n != 2 && n != 3 {
            return invalid(format!("profile dim must be 2 or 3, got {n}"));
        }
        if !(self.cutoff_radius > 0.0 && self.smoothing_width > 0.0) {
            return invalid("cutoff_radius and smoothing_width must be positive".into());
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return invalid(format!("amplitude must be nonnegative, got {}", self.amplitude));
        }
        let half = -(n as f64) / 2.0;
        match &self.shape {
            ProfileShape::PowerLaw { r } if !(*r > half) => {
                invalid(format!("power-law exponent r = {r} must exceed -n/2 = {half}"))
            }
            ProfileShape::Oscillatory {
                r_lo,
                r_hi,
                period_decades,
            } => {
                if !(r_lo < r_hi) || !(*r_lo > half) || !(*period_decades > 0.0) {
                    invalid(format!(
                        "oscillatory profile needs -n/2 < r_lo < r_hi and a positive period, got {r_lo}, {r_hi}, {period_decades}"
                    ))
                } else {
                    Ok(())
                }
            }
            ProfileShape::LpLike { p } => lp_predicted_character(*p, n).map(|_| ()),
            ProfileShape::Custom { knots } => {
                let ok = knots.len() >= 2
                    && knots.iter().all(|k| k[0] > 0.0 && k[1] > 0.0)
                    && knots.windows(2).all(|w| w[0][0] < w[1][0]);
                if !ok {
                    return invalid("custom knots need >= 2 positive, increasing radii".into());
                }
                let slope = log_slope(knots[0], knots[1]);
                if slope > half {
                    Ok(())
                } else {
                    invalid(format!("custom profile low-frequency slope {slope} must exceed -n/2"))
                }
            }
            _ => Ok(()),
        }
    }

    /// Exponent `r` with `A(rho) ~ rho^r` as `rho -> 0`, when there is one.
    pub fn low_frequency_exponent(&self) -> Option<f64> {
        match &self.shape {
            ProfileShape::PowerLaw { r } => Some(*r),
            ProfileShape::LpLike { p } => lp_predicted_character(*p, self.dim).ok(),
            ProfileShape::Custom { knots } if knots.len() >= 2 => Some(log_slope(knots[0], knots[1])),
            _ => None,
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.cutoff_radius + self.smoothing_width
    }

    fn shape_value(&self, rho: f64) -> f64 {
        match &self.shape {
            ProfileShape::PowerLaw { r } => rho.powf(*r),
            ProfileShape::LpLike { p } => {
                rho.powf(lp_predicted_character(*p, self.dim).unwrap_or(0.0))
            }
            ProfileShape::Oscillatory {
                r_lo,
                r_hi,
                period_decades,
            } => {
                let mid = 0.5 * (r_lo + r_hi);
                let half_gap = 0.5 * (r_hi - r_lo);
                let period = period_decades * std::f64::consts::LN_10;
                let x = rho.ln();
                (mid * x - half_gap * period / (2.0 * PI) * (2.0 * PI * x / period).cos()).exp()
            }
            ProfileShape::Custom { knots } => {
                let x = rho.ln();
                let seg = knots
                    .windows(2)
                    .position(|w| rho <= w[1][0])
                    .unwrap_or(knots.len() - 2);
                let (a, b) = (knots[seg], knots[seg + 1]);
                let s = log_slope(a, b);
                (a[1].ln() + s * (x - a[0].ln())).exp()
            }
        }
    }

    fn taper(&self, rho: f64) -> f64 {
        if rho <= self.cutoff_radius {
            1.0
        } else if rho < self.support_radius() {
            let s = (rho - self.cutoff_radius) / self.smoothing_width;
            (0.5 * PI * s).cos().powi(2)
        } else {
            0.0
        }
    }

    /// `A(rho)`.
    pub fn amplitude_at(&self, rho: f64) -> f64 {
        if rho <= 0.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        let t = self.taper(rho);
        if t == 0.0 {
            return 0.0;
        }
        self.amplitude * self.shape_value(rho) * t
    }

    /// `sigma_{n-1} int_0^rho w(s) A(s)^2 s^{n-1} ds`, integrating from the
    /// origin in log-radius and across the taper separately.
    ///
    /// `hints` are radii where the integrand changes character; they seed
    /// the adaptive panels.
    pub fn radial_integral(
        &self,
        rho: f64,
        weight: impl Fn(f64) -> f64,
        hints: &[f64],
        opts: &QuadOptions,
    ) -> Result<f64> {
        if self.amplitude == 0.0 || rho <= 0.0 {
            return Ok(0.0);
        }
        let n = self.dim as i32;
        let integrand = |s: f64| {
            let a = self.amplitude_at(s);
            weight(s) * a * a * s.powi(n - 1)
        };
        let inner = rho.min(self.cutoff_radius);
        let mut total = integrate_from_zero(&integrand, inner, hints, opts)?;
        if rho > self.cutoff_radius {
            let outer = rho.min(self.support_radius());
            total += integrate(&integrand, self.cutoff_radius, outer, hints, opts)?;
        }
        Ok(unit_sphere_area(self.dim) * total)
    }
}

fn log_slope(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[1].ln() - a[1].ln()) / (b[0].ln() - a[0].ln())
}

/// `r* = -n (1 - 1/p)` for data in `L^p`, `1 <= p < 2`.
pub fn lp_predicted_character(p: f64, n: usize) -> Result<f64> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [1, 2), got {p}")));
    }
    Ok(-(n as f64) * (1.0 - 1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SampleSource {
    Continuum,
    /// Lattice sums; `spacing` is the frequency-lattice spacing `2 pi / L`.
    Lattice { spacing: f64 },
}

/// Shell energies at decreasing radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSamples {
    pub radii: Vec<f64>,
    pub shell_energy: Vec<f64>,
    pub dim: usize,
    /// Power `s` of the `|xi|^{2s}` weight in the integrand.
    pub weight_power: u32,
    pub source: SampleSource,
}

impl SpectrumSamples {
    pub fn new(radii: Vec<f64>, shell_energy: Vec<f64>, dim: usize) -> Result<Self> {
        check_radii(&radii)?;
        if radii.len() != shell_energy.len() {
            return Err(Error::InvalidParameter(
                "radii and shell energies differ in length".into(),
            ));
        }
        Ok(SpectrumSamples {
            radii,
            shell_energy,
            dim,
            weight_power: 0,
            source: SampleSource::Continuum,
        })
    }

    /// Decades of radius covered by the samples.
    pub fn decades(&self) -> f64 {
        match (self.radii.first(), self.radii.last()) {
            (Some(a), Some(b)) => (a / b).log10(),
            _ => 0.0,
        }
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "radii must be sorted strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// `count` radii logarithmically spaced from `hi` down to `lo`.
pub fn log_radii(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..count)
        .map(|j| (a + (b - a) * j as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// What a shell energy is computed from.
#[derive(Debug, Clone, Copy)]
pub enum SpectrumSource<'a> {
    Profile(&'a RadialProfile),
    Field(&'a SpectralVectorField),
}

/// `S(rho) = int_{B(rho)} |v_hat|^2` at each radius.
pub fn shell_energy(source: SpectrumSource<'_>, radii: &[f64]) -> Result<SpectrumSamples> {
    shell_energy_weighted(source, radii, 0)
}

/// Shell energy of `|xi|^{2s} |v_hat|^2`, i.e. of the data `Lambda^s v`.
pub fn shell_energy_weighted(
    source: SpectrumSource<'_>,
    radii: &[f64],
    weight_power: u32,
) -> Result<SpectrumSamples> {
    check_radii(radii)?;
    match source {
        SpectrumSource::Profile(profile) => {
            profile.validate()?;
            let opts = QuadOptions {
                rel_tol: 1e-11,
                ..QuadOptions::default()
            };
            let w = weight_power as i32;
            let energies = radii
                .iter()
                .map(|&rho| profile.radial_integral(rho, |s| s.powi(2 * w), &[], &opts))
                .collect::<Result<Vec<_>>>()?;
            Ok(SpectrumSamples {
                radii: radii.to_vec(),
                shell_energy: energies,
                dim: profile.dim,
                weight_power,
                source: SampleSource::Continuum,
            })
        }
        SpectrumSource::Field(field) => lattice_shell_energy(field, radii, weight_power),
    }
}

fn lattice_shell_energy(
    field: &SpectralVectorField,
    radii: &[f64],
    weight_power: u32,
) -> Result<SpectrumSamples> {
    let grid = field.grid();
    let spacing = grid.wavenumber_spacing();
    let limit = 2.0 * spacing;
    if let Some(&bad) = radii.iter().find(|&&r| r < limit) {
        return Err(Error::ResolutionLimited { radius: bad, limit });
    }
    let mut shells: Vec<(f64, f64)> = (1..grid.len())
        .map(|m| {
            let k2 = grid.k2(m);
            let e: f64 = field.components().iter().map(|c| c[m].norm_sqr()).sum();
            (k2.sqrt(), e * k2.powi(weight_power as i32))
        })
        .filter(|&(k, _)| k > 0.0)
        .collect();
    shells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cumulative = Vec::with_capacity(shells.len());
    let mut acc = 0.0;
    for &(_, e) in &shells {
        acc += e;
        cumulative.push(acc);
    }
    let weight = spacing.powi(grid.dim() as i32);
    let energies = radii
        .iter()
        .map(|&rho| {
            let count = shells.partition_point(|&(k, _)| k <= rho);
            if count == 0 {
                0.0
            } else {
                cumulative[count - 1] * weight
            }
        })
        .collect();
    Ok(SpectrumSamples {
        radii: radii.to_vec(),
        shell_energy: energies,
        dim: grid.dim(),
        weight_power,
        source: SampleSource::Lattice { spacing },
    })
}

/// Finite-radius proxies for the liminf / limsup decay indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayIndicator {
    pub r: f64,
    pub p_lower: f64,
    pub p_upper: f64,
}

/// Knobs of the decay-character estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorOptions {
    pub min_samples: usize,
    pub min_decades: f64,
    /// Fraction of smallest radii used as the liminf/limsup window.
    pub indicator_fraction: f64,
    /// Fraction of smallest radii in which local slopes are fitted.
    pub regime_fraction: f64,
    /// Consecutive samples per sliding slope window, capped at the regime size.
    pub window: usize,
    /// `r_hat` is defined when `r_plus - r_minus` does not exceed this.
    pub defined_tolerance: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            min_samples: 8,
            min_decades: 2.0,
            indicator_fraction: 0.25,
            regime_fraction: 0.25,
            window: 5,
            defined_tolerance: 0.1,
        }
    }
}

impl EstimatorOptions {
    /// Settings for lattice shell sums, whose trusted range (two lattice
    /// spacings up to the dealiasing band) spans about one decade. Lattice
    /// point counting makes short-window slopes noisy, so a single slope is
    /// fitted over the whole range and `r_plus == r_minus`.
    pub fn lattice() -> Self {
        EstimatorOptions {
            min_decades: 0.5,
            indicator_fraction: 0.5,
            regime_fraction: 1.0,
            window: usize::MAX,
            ..Self::default()
        }
    }
}

fn check_sample_count(samples: &SpectrumSamples, opts: &EstimatorOptions) -> Result<()> {
    if samples.radii.len() < opts.min_samples {
        return Err(Error::InsufficientSamples(format!(
            "{} radii, need at least {}",
            samples.radii.len(),
            opts.min_samples
        )));
    }
    if samples.decades() < opts.min_decades - 1e-12 {
        return Err(Error::InsufficientSamples(format!(
            "radii span {:.2} decades, need {}",
            samples.decades(),
            opts.min_decades
        )));
    }
    Ok(())
}

fn tail_len(len: usize, fraction: f64, min: usize) -> usize {
    ((len as f64 * fraction).ceil() as usize).clamp(min.min(len), len)
}

/// Evaluates `rho^{-2r-n} S(rho)` and returns its min / max over the
/// smallest-radius window.
pub fn decay_indicator(
    samples: &SpectrumSamples,
    r: f64,
    opts: &EstimatorOptions,
) -> Result<DecayIndicator> {
    check_sample_count(samples, opts)?;
    let n = samples.dim as f64;
    let len = samples.radii.len();
    let take = tail_len(len, opts.indicator_fraction, 2);
    let values = samples.radii[len - take..]
        .iter()
        .zip(&samples.shell_energy[len - take..])
        .map(|(&rho, &s)| {
            let v = rho.powf(-2.0 * r - n) * s;
            if v > P_SENTINEL {
                f64::INFINITY
            } else {
                v
            }
        });
    let (lo, hi) = values.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(DecayIndicator {
        r,
        p_lower: lo,
        p_upper: hi,
    })
}

/// Estimated generalized decay characters of one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCharacterReport {
    pub r_hat: Option<f64>,
    pub r_plus: f64,
    pub r_minus: f64,
    pub p_r_estimate: f64,
    /// Radius interval `[lo, hi]` of the fitted regime.
    pub fit_window: (f64, f64),
    pub residual: f64,
    pub defined_tolerance: f64,
    pub lattice_based: bool,
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `d log S / d log rho` over sliding windows in the small-radius
/// regime; `r_plus` / `r_minus` come from the steepest / shallowest window.
pub fn estimate_characters(
    samples: &SpectrumSamples,
    opts: &EstimatorOptions,
) -> Result<DecayCharacterReport> {
    check_sample_count(samples, opts)?;
    for (j, w) in samples.shell_energy.windows(2).enumerate() {
        if w[1] > w[0] * (1.0 + 1e-12) {
            return Err(Error::NonMonotone(samples.radii[j + 1]));
        }
    }
    let len = samples.radii.len();
    let take = tail_len(len, opts.regime_fraction, opts.window.max(2).saturating_add(1));
    let window = opts.window.clamp(2, take);
    let radii = &samples.radii[len - take..];
    let energy = &samples.shell_energy[len - take..];
    if energy.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateSpectrum(
            "shell energy vanishes in the small-radius regime".into(),
        ));
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = energy.iter().map(|s| s.ln()).collect();

    let slopes: Vec<f64> = (0..=take - window)
        .map(|i| least_squares(&lx[i..i + window], &ly[i..i + window]).0)
        .collect();
    let n = samples.dim as f64;
    let max_slope = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_slope = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_plus = (max_slope - n) / 2.0;
    let r_minus = (min_slope - n) / 2.0;
    let r_hat = (r_plus - r_minus <= opts.defined_tolerance).then(|| 0.5 * (r_plus + r_minus));

    let (slope, intercept) = least_squares(&lx, &ly);
    let residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);

    let indicator = decay_indicator(samples, r_hat.unwrap_or(r_plus), opts)?;
    Ok(DecayCharacterReport {
        r_hat,
        r_plus,
        r_minus,
        p_r_estimate: 0.5 * (indicator.p_lower + indicator.p_upper),
        fit_window: (radii[take - 1], radii[0]),
        residual,
        defined_tolerance: opts.defined_tolerance,
        lattice_based: matches!(samples.source, SampleSource::Lattice { .. }),
    })
}

/// Consistency of the shift `r*(Lambda^s v) = s + r*(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub shift: u32,
    pub base_character: Option<f64>,
    pub shifted_character: Option<f64>,
    pub difference: Option<f64>,
    pub tolerance: f64,
    pub consistent: Option<bool>,
}

/// Compares characters estimated from `|xi|^{2s}`-weighted shell energies
/// against the unweighted ones; the difference should equal `s`.
pub fn shift_by_gradient(
    base: &SpectrumSamples,
    shifted: &SpectrumSamples,
    opts: &EstimatorOptions,
    tolerance: f64,
) -> Result<ShiftReport> {
    if base.radii != shifted.radii || base.dim != shifted.dim {
        return Err(Error::InvalidParameter(
            "shift comparison needs samples at identical radii".into(),
        ));
    }
    if shifted.weight_power <= base.weight_power {
        return Err(Error::InvalidParameter(
            "shifted samples must carry a higher |xi| weight".into(),
        ));
    }
    let shift = shifted.weight_power - base.weight_power;
    let character = |s: &SpectrumSamples| match estimate_characters(s, opts) {
        Ok(rep) => Ok(rep.r_hat),
        Err(Error::DegenerateSpectrum(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let b = character(base)?;
    let s = character(shifted)?;
    let difference = b.zip(s).map(|(b, s)| s - b);
    Ok(ShiftReport {
        shift,
        base_character: b,
        shifted_character: s,
        difference,
        tolerance,
        consistent: difference.map(|d| (d - shift as f64).abs() <= tolerance),
    })
}

/// Requested `||u_0||_{V_2}` (the smallness knob) and the `alpha` defining the norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct V2Target {
    pub norm: f64,
    pub alpha: f64,
}

/// Random divergence-free data on `grid` with `|u_hat(k)| = A(|k|)`.
///
/// Each retained mode gets a seeded random complex direction orthogonal to
/// `k`; conjugate partners are filled by symmetry and the mean is zero. With
/// `target_v2_norm`, the field is rescaled so that `||u||_{V_2}` equals it.
pub fn make_data(
    profile: &RadialProfile,
    grid: &Arc<Grid>,
    seed: u64,
    target_v2_norm: Option<V2Target>,
) -> Result<SpectralVectorField> {
    profile.validate()?;
    if profile.dim != grid.dim() {
        return Err(Error::InvalidParameter(format!(
            "profile dim {} does not match grid dim {}",
            profile.dim,
            grid.dim()
        )));
    }
    let band = grid.dealias_cutoff();
    if profile.support_radius() >= band {
        return Err(Error::ResolutionLimited {
            radius: profile.support_radius(),
            limit: band,
        });
    }
    let spacing = grid.wavenumber_spacing();
    if profile.cutoff_radius < 2.0 * spacing {
        return Err(Error::ResolutionLimited {
            radius: profile.cutoff_radius,
            limit: 2.0 * spacing,
        });
    }

    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = SpectralVectorField::zeros(grid.clone());
    for m in 1..grid.len() {
        let partner = grid.mirror(m);
        if partner <= m || !grid.is_retained(m) {
            continue;
        }
        let mut v = [Complex64::new(0.0, 0.0); 3];
        for c in v.iter_mut().take(dim) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *c = Complex64::new(re, im);
        }
        let k = grid.wavevector(m);
        let k2 = grid.k2(m);
        let kv: Complex64 = (0..dim).map(|a| v[a] * k[a]).sum();
        for a in 0..dim {
            v[a] -= kv * (k[a] / k2);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let amp = profile.amplitude_at(k2.sqrt());
        if norm == 0.0 || amp == 0.0 {
            continue;
        }
        let s = amp / norm;
        let coeff = v.map(|z| z * s);
        field.set_mode(m, coeff);
        field.set_mode(partner, coeff.map(|z| z.conj()));
    }
    let mut field = field.leray_project();
    field.dealias();
    if let Some(target) = target_v2_norm {
        if !(target.norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target V2 norm must be positive, got {}",
                target.norm
            )));
        }
        let current = norm_v2_sq(&field, target.alpha)?;
        if current == 0.0 {
            return Err(Error::DegenerateSpectrum(
                "cannot rescale zero data to a V2 target".into(),
            ));
        }
        field = field.scale(target.norm / current.sqrt());
    }
    Ok(field)
}
