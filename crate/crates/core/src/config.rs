//! JSON experiment configuration: parsing, defaults, validation, echo.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decay_character::{EstimatorOptions, ProfileShape, RadialProfile};
use crate::error::{Error, Result};
use crate::fields::{GridSpec, SimParams};
use crate::harness::{FitWindows, Tolerances};
use crate::solver::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LinearDecay,
    Simulate,
    DecayCharacter,
    Compare,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::LinearDecay => "linear-decay",
            Mode::Simulate => "simulate",
            Mode::DecayCharacter => "decay-character",
            Mode::Compare => "compare",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    PowerLaw,
    Oscillatory,
    LpLike,
    Custom,
}

/// Flat, user-facing form of a [`RadialProfile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub kind: ProfileKind,
    pub r: Option<f64>,
    pub r_lo: Option<f64>,
    pub r_hi: Option<f64>,
    pub period_decades: Option<f64>,
    pub p: Option<f64>,
    pub knots: Option<Vec<[f64; 2]>>,
    pub cutoff_radius: f64,
    pub smoothing_width: f64,
    pub amplitude: f64,
    /// Overrides the top-level seed when given.
    pub seed: Option<u64>,
    pub target_v2_norm: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            kind: ProfileKind::PowerLaw,
            r: None,
            r_lo: None,
            r_hi: None,
            period_decades: None,
            p: None,
            knots: None,
            cutoff_radius: 0.5,
            smoothing_width: 0.25,
            amplitude: 1.0,
            seed: None,
            target_v2_norm: None,
        }
    }
}

impl ProfileConfig {
    pub fn power_law(r: f64) -> Self {
        ProfileConfig {
            r: Some(r),
            ..Self::default()
        }
    }

    pub fn to_profile(&self, dim: usize) -> Result<RadialProfile> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("profile kind {:?} needs `{name}`", self.kind)))
        };
        let shape = match self.kind {
            ProfileKind::PowerLaw => ProfileShape::PowerLaw { r: need(self.r, "r")? },
            ProfileKind::Oscillatory => ProfileShape::Oscillatory {
                r_lo: need(self.r_lo, "r_lo")?,
                r_hi: need(self.r_hi, "r_hi")?,
                period_decades: self.period_decades.unwrap_or(2.0),
            },
            ProfileKind::LpLike => ProfileShape::LpLike { p: need(self.p, "p")? },
            ProfileKind::Custom => ProfileShape::Custom {
                knots: self
                    .knots
                    .clone()
                    .ok_or_else(|| Error::Config("custom profile needs `knots`".into()))?,
            },
        };
        let profile = RadialProfile {
            shape,
            cutoff_radius: self.cutoff_radius,
            smoothing_width: self.smoothing_width,
            amplitude: self.amplitude,
            dim,
        };
        profile.validate()?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// `None` selects the default from the stability heuristic.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub output_stride: usize,
    pub scheme: Scheme,
    pub diagnostics_stride: usize,
    pub snapshot_times: Vec<f64>,
    /// Written by the echo when a requested `dt` was replaced.
    pub requested_dt: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: None,
            t_end: 50.0,
            output_stride: 1,
            scheme: Scheme::IntegratingFactorRk4,
            diagnostics_stride: 4,
            snapshot_times: Vec::new(),
            requested_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSection {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
    /// Derivative orders `m` to evaluate.
    pub orders: Vec<u32>,
}

impl Default for LinearSection {
    fn default() -> Self {
        LinearSection {
            t_min: 0.1,
            t_max: 1e4,
            per_decade: 32,
            orders: vec![0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CharacterSource {
    /// Quadrature of the analytic profile.
    #[default]
    Profile,
    /// Lattice sums of data generated on the configured grid.
    Grid,
    /// Lattice sums of a stored snapshot.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacterSection {
    pub source: CharacterSource,
    pub snapshot_path: Option<PathBuf>,
    /// Largest / smallest sampled radius; `None` picks a range suited to the source.
    pub radius_max: Option<f64>,
    pub radius_min: Option<f64>,
    pub samples: usize,
    pub estimator: Option<EstimatorOptions>,
    /// Allowed `|r_hat - r|` when the profile exponent is known.
    pub tolerance: Option<f64>,
    pub shift_tolerance: f64,
}

impl Default for CharacterSection {
    fn default() -> Self {
        CharacterSection {
            source: CharacterSource::Profile,
            snapshot_path: None,
            radius_max: None,
            radius_min: None,
            samples: 64,
            estimator: None,
            tolerance: None,
            shift_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Mode run for each point: `linear-decay`, `simulate`, `decay-character` or `compare`.
    pub base_mode: Mode,
    pub r_values: Vec<f64>,
    /// `[alpha, mu]` pairs; empty keeps the top-level values.
    pub params: Vec<[f64; 2]>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            base_mode: Mode::LinearDecay,
            r_values: vec![-1.0, -0.5, 0.0, 1.0, 2.0],
            params: Vec::new(),
        }
    }
}

fn default_grid() -> GridSpec {
    GridSpec {
        dim: 3,
        n_points: 48,
        box_length: 32.0 * PI,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub alpha: f64,
    pub mu: f64,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub linear: LinearSection,
    #[serde(default)]
    pub decay_character: CharacterSection,
    #[serde(default)]
    pub windows: FitWindows,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sweep: SweepSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// Default `||u0||_{V_2}` for nonlinear runs (the smallness knob).
pub const DEFAULT_TARGET_V2_NORM: f64 = 1e-2;

impl ExperimentConfig {
    /// A configuration with every optional field at its default.
    pub fn new(mode: Mode, alpha: f64, mu: f64, profile: ProfileConfig) -> Self {
        ExperimentConfig {
            mode,
            alpha,
            mu,
            grid: default_grid(),
            profile,
            solver: SolverSection::default(),
            linear: LinearSection::default(),
            decay_character: CharacterSection::default(),
            windows: FitWindows::default(),
            tolerances: Tolerances::default(),
            output: default_output(),
            seed: None,
            sweep: SweepSection::default(),
        }
    }

    pub fn params(&self) -> SimParams {
        SimParams {
            alpha: self.alpha,
            mu: self.mu,
        }
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn radial_profile(&self) -> Result<RadialProfile> {
        self.profile.to_profile(self.grid.dim)
    }

    /// Fills derived defaults so that the echoed config is complete and
    /// `parse(emit(c)) == c`.
    pub fn normalize(&mut self) -> Result<()> {
        match (self.seed, self.profile.seed) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "top-level seed {a} conflicts with profile seed {b}"
                )))
            }
            (_, Some(b)) => self.seed = Some(b),
            (None, None) => self.seed = Some(0),
            _ => {}
        }
        self.profile.seed = None;
        if self.profile.target_v2_norm.is_none()
            && matches!(self.mode, Mode::Simulate | Mode::Compare)
        {
            self.profile.target_v2_norm = Some(DEFAULT_TARGET_V2_NORM);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.params().validate().map_err(cfg)?;
        let g = &self.grid;
        if g.dim != 2 && g.dim != 3 {
            return Err(Error::Config(format!("grid.dim must be 2 or 3, got {}", g.dim)));
        }
        if g.n_points < 8 || g.n_points % 2 != 0 {
            return Err(Error::Config(format!(
                "grid.n_points must be even and >= 8, got {}",
                g.n_points
            )));
        }
        if !(g.box_length > 0.0 && g.box_length.is_finite()) {
            return Err(Error::Config(format!("grid.box_length must be positive, got {}", g.box_length)));
        }
        let profile_needed = !(self.mode == Mode::DecayCharacter
            && self.decay_character.source == CharacterSource::Snapshot)
            && self.mode != Mode::Sweep;
        if profile_needed {
            self.radial_profile().map_err(cfg)?;
        }
        if let Some(v) = self.profile.target_v2_norm {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("target_v2_norm must be positive, got {v}")));
            }
        }
        let s = &self.solver;
        if let Some(dt) = s.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("solver.dt must be positive, got {dt}")));
            }
        }
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::Config(format!("solver.t_end must be positive, got {}", s.t_end)));
        }
        if s.output_stride == 0 || s.diagnostics_stride == 0 {
            return Err(Error::Config("solver strides must be positive".into()));
        }
        if s.snapshot_times.iter().any(|&t| !(t >= 0.0 && t <= s.t_end)) {
            return Err(Error::Config("snapshot_times must lie in [0, t_end]".into()));
        }
        let l = &self.linear;
        if !(l.t_min > 0.0 && l.t_max > l.t_min) || l.per_decade == 0 {
            return Err(Error::Config(format!(
                "linear time range needs 0 < t_min < t_max and per_decade > 0, got [{}, {}], {}",
                l.t_min, l.t_max, l.per_decade
            )));
        }
        if l.orders.is_empty() || l.orders.iter().any(|&m| m > crate::fields::MAX_DERIVATIVE_ORDER) {
            return Err(Error::Config("linear.orders must be nonempty with every m <= 4".into()));
        }
        let c = &self.decay_character;
        if c.source == CharacterSource::Snapshot && c.snapshot_path.is_none() {
            return Err(Error::Config("snapshot source needs decay_character.snapshot_path".into()));
        }
        if c.samples < 8 {
            return Err(Error::Config("decay_character.samples must be at least 8".into()));
        }
        if let (Some(a), Some(b)) = (c.radius_max, c.radius_min) {
            if !(a > b && b > 0.0) {
                return Err(Error::Config("need radius_max > radius_min > 0".into()));
            }
        }
        for (name, w) in [("linear", self.windows.linear), ("torus", self.windows.torus)] {
            if let Some((a, b)) = w {
                if !(a >= 0.0 && b > a) {
                    return Err(Error::Config(format!("windows.{name} must satisfy 0 <= lo < hi")));
                }
            }
        }
        let t = &self.tolerances;
        if [t.linear, t.torus, t.gap].iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Config("tolerances must be nonnegative".into()));
        }
        if self.mode == Mode::Sweep {
            if self.sweep.base_mode == Mode::Sweep {
                return Err(Error::Config("sweep.base_mode cannot be sweep".into()));
            }
            if self.sweep.r_values.is_empty() {
                return Err(Error::Config("sweep.r_values must be nonempty".into()));
            }
            for &[alpha, mu] in &self.sweep.params {
                SimParams { alpha, mu }.validate().map_err(cfg)?;
            }
            for point in self.sweep_points() {
                point.validate()?;
            }
        }
        Ok(())
    }

    /// One config per sweep point, each writing to its own subdirectory.
    pub fn sweep_points(&self) -> Vec<ExperimentConfig> {
        let params: Vec<[f64; 2]> = if self.sweep.params.is_empty() {
            vec![[self.alpha, self.mu]]
        } else {
            self.sweep.params.clone()
        };
        let mut out = Vec::new();
        for (i, &[alpha, mu]) in params.iter().enumerate() {
            for (j, &r) in self.sweep.r_values.iter().enumerate() {
                let mut c = self.clone();
                c.mode = self.sweep.base_mode;
                c.alpha = alpha;
                c.mu = mu;
                c.profile.kind = ProfileKind::PowerLaw;
                c.profile.r = Some(r);
                c.output = self.output.join(format!("point_{i:02}_{j:02}"));
                c.sweep = SweepSection::default();
                if c.profile.target_v2_norm.is_none()
                    && matches!(c.mode, Mode::Simulate | Mode::Compare)
                {
                    c.profile.target_v2_norm = Some(DEFAULT_TARGET_V2_NORM);
                }
                out.push(c);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses, normalizes and validates a config from JSON text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
    config.normalize()?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Writes `effective_config.json` into `dir`.
pub fn write_effective_config(config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("effective_config.json");
    std::fs::write(&path, config.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
