use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the second-grade system: `alpha` multiplies the
/// regularizing `-alpha * Laplacian` term, `mu` is the kinematic viscosity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub alpha: f64,
    pub mu: f64,
}

impl SimParams {
    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        let p = SimParams { alpha, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// Symbol of the linear pseudo-parabolic operator at |xi|^2 = `k2`.
    #[inline]
    pub fn multiplier(&self, k2: f64) -> f64 {
        -self.mu * k2 / (1.0 + self.alpha * k2)
    }
}

/// Description of a periodic grid, used for serialization and equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n_points: usize,
    pub box_length: f64,
}

/// Uniform periodic grid on `[0, L)^dim` with its Fourier lattice.
///
/// Lattice index `j` maps to the signed integer `j` for `j < n/2` and
/// `j - n` above. The Nyquist index `n/2` is given wavenumber zero for every
/// spectral operator, so odd derivatives of real fields stay real; it is
/// always outside the dealiasing band.
pub struct Grid {
    spec: GridSpec,
    n_modes: usize,
    wavevectors: Vec<[f64; 3]>,
    k2: Vec<f64>,
    retained: Vec<bool>,
    mirror: Vec<usize>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(dim: usize, n_points: usize, box_length: f64) -> Result<Arc<Self>> {
        Self::from_spec(GridSpec {
            dim,
            n_points,
            box_length,
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Arc<Self>> {
        let GridSpec {
            dim,
            n_points: n,
            box_length,
        } = spec;
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!(
                "grid dim must be 2 or 3, got {dim}"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "n_points must be an even integer >= 8, got {n}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box_length must be positive, got {box_length}"
            )));
        }

        let n_modes = n.pow(dim as u32);
        let dk = 2.0 * PI / box_length;
        // Lattice integers for the mask; derivative wavenumbers zero the Nyquist.
        let lattice: Vec<i64> = (0..n)
            .map(|j| {
                if j <= n / 2 {
                    j as i64
                } else {
                    j as i64 - n as i64
                }
            })
            .collect();
        let deriv: Vec<f64> = lattice
            .iter()
            .map(|&m| if m.unsigned_abs() as usize == n / 2 { 0.0 } else { m as f64 * dk })
            .collect();
        // |m| < n/3 is the two-thirds rule |k_i| < (2/3) * (pi * n / L).
        let keep: Vec<bool> = lattice.iter().map(|&m| 3 * m.unsigned_abs() < n as u64).collect();

        let mut wavevectors = Vec::with_capacity(n_modes);
        let mut k2 = Vec::with_capacity(n_modes);
        let mut retained = Vec::with_capacity(n_modes);
        let mut mirror = Vec::with_capacity(n_modes);
        let mut idx = [0usize; 3];
        for flat in 0..n_modes {
            let mut rem = flat;
            for a in (0..dim).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            let mut kv = [0.0; 3];
            let mut keep_all = true;
            let mut mirror_flat = 0;
            for a in 0..dim {
                kv[a] = deriv[idx[a]];
                keep_all &= keep[idx[a]];
                mirror_flat = mirror_flat * n + (n - idx[a]) % n;
            }
            wavevectors.push(kv);
            k2.push(kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]);
            retained.push(keep_all);
            mirror.push(mirror_flat);
        }

        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(n);
        let fft_inverse = planner.plan_fft_inverse(n);

        Ok(Arc::new(Grid {
            spec,
            n_modes,
            wavevectors,
            k2,
            retained,
            mirror,
            fft_forward,
            fft_inverse,
        }))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn n_points(&self) -> usize {
        self.spec.n_points
    }

    pub fn box_length(&self) -> f64 {
        self.spec.box_length
    }

    /// Total number of grid points (equivalently, Fourier modes).
    pub fn len(&self) -> usize {
        self.n_modes
    }

    pub fn is_empty(&self) -> bool {
        self.n_modes == 0
    }

    /// Lattice spacing in frequency space, `2 pi / L`.
    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.spec.box_length
    }

    /// Two-thirds-rule cutoff: a mode is retained iff every `|k_i|` is below this.
    pub fn dealias_cutoff(&self) -> f64 {
        (2.0 / 3.0) * PI * self.spec.n_points as f64 / self.spec.box_length
    }

    /// Physical volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (self.spec.box_length / self.spec.n_points as f64).powi(self.spec.dim as i32)
    }

    /// Physical volume of the box.
    pub fn volume(&self) -> f64 {
        self.spec.box_length.powi(self.spec.dim as i32)
    }

    #[inline]
    pub fn wavevector(&self, mode: usize) -> [f64; 3] {
        self.wavevectors[mode]
    }

    #[inline]
    pub fn k2(&self, mode: usize) -> f64 {
        self.k2[mode]
    }

    pub fn k2_all(&self) -> &[f64] {
        &self.k2
    }

    pub fn wavevectors(&self) -> &[[f64; 3]] {
        &self.wavevectors
    }

    #[inline]
    pub fn is_retained(&self, mode: usize) -> bool {
        self.retained[mode]
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.retained
    }

    /// Flat index of the mode at `-k`.
    #[inline]
    pub fn mirror(&self, mode: usize) -> usize {
        self.mirror[mode]
    }

    /// Physical coordinate of grid point `flat` along each axis.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let n = self.spec.n_points;
        let h = self.spec.box_length / n as f64;
        let mut x = [0.0; 3];
        let mut rem = flat;
        for a in (0..self.spec.dim).rev() {
            x[a] = (rem % n) as f64 * h;
            rem /= n;
        }
        x
    }

    pub(crate) fn fft_plan(&self, inverse: bool) -> &Arc<dyn Fft<f64>> {
        if inverse {
            &self.fft_inverse
        } else {
            &self.fft_forward
        }
    }

    /// In-place unnormalized multidimensional DFT (`exp(-i k x)` forward).
    ///
    /// Each pass transforms the contiguous last axis and then rotates the
    /// axes cyclically, so after `dim` passes the layout is restored.
    pub(crate) fn dft_in_place(&self, data: &mut Vec<Complex64>, inverse: bool) {
        let n = self.spec.n_points;
        let rows = self.n_modes / n;
        let fft = self.fft_plan(inverse);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
        for _ in 0..self.spec.dim {
            fft.process_with_scratch(data, &mut scratch);
            // buf (n x rows) = transpose of data (rows x n)
            const BLOCK: usize = 16;
            for r0 in (0..rows).step_by(BLOCK) {
                let r1 = (r0 + BLOCK).min(rows);
                for c in 0..n {
                    let dst = &mut buf[c * rows + r0..c * rows + r1];
                    for (d, r) in dst.iter_mut().zip(r0..r1) {
                        *d = data[r * n + c];
                    }
                }
            }
            std::mem::swap(data, &mut buf);
        }
    }
}
