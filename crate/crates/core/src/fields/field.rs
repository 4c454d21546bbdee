use std::sync::Arc;

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative conjugate-symmetry defect accepted by [`SpectralVectorField::to_real`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Velocity samples on the physical grid, one array per component.
#[derive(Debug, Clone)]
pub struct RealVectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

/// Fourier coefficients of a real vector field.
///
/// Normalization: `u_hat(k) = (L/n)^dim * sum_x u(x) exp(-i k.x)`, the
/// Riemann sum of the non-unitary transform `int u(x) exp(-i k.x) dx`. The
/// inverse is `u(x) = L^-dim * sum_k u_hat(k) exp(i k.x)`. With this choice
/// `L^-dim * sum_k |u_hat|^2 = int |u|^2 dx` and
/// `(2 pi / L)^dim * sum_{|k| <= rho} |u_hat|^2` approximates the continuum
/// shell integral `int_{B(rho)} |u_hat(xi)|^2 d xi`. Every norm and
/// shell sum in this crate follows from these two identities.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelmholtzDirection {
    /// Multiply by `1 + alpha |k|^2`.
    Forward,
    /// Divide by `1 + alpha |k|^2`.
    Inverse,
}

fn check_components<T>(grid: &Grid, components: &[Vec<T>]) -> Result<()> {
    if components.len() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "expected {} components, got {}",
            grid.dim(),
            components.len()
        )));
    }
    if let Some(c) = components.iter().find(|c| c.len() != grid.len()) {
        return Err(Error::GridMismatch(format!(
            "component has {} samples, grid has {}",
            c.len(),
            grid.len()
        )));
    }
    Ok(())
}

impl RealVectorField {
    pub fn new(grid: Arc<Grid>, components: Vec<Vec<f64>>) -> Result<Self> {
        check_components(&grid, &components)?;
        Ok(RealVectorField { grid, components })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let components = vec![vec![0.0; grid.len()]; grid.dim()];
        RealVectorField { grid, components }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let dim = grid.dim();
        let mut components = vec![vec![0.0; grid.len()]; dim];
        for p in 0..grid.len() {
            let v = f(grid.position(p));
            for (a, c) in components.iter_mut().enumerate() {
                c[p] = v[a];
            }
        }
        RealVectorField { grid, components }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    /// `int |u|^2 dx` by the rectangle rule on the grid.
    pub fn quadrature_l2_sq(&self) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum();
        sum * self.grid.cell_volume()
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| {
                self.components
                    .iter()
                    .map(|c| c[p] * c[p])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_spectral(&self) -> SpectralVectorField {
        let scale = self.grid.cell_volume();
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut data: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                self.grid.dft_in_place(&mut data, false);
                for z in data.iter_mut() {
                    *z *= scale;
                }
                data
            })
            .collect();
        let mut out = SpectralVectorField {
            grid: self.grid.clone(),
            components,
        };
        out.symmetrize();
        out
    }
}

impl SpectralVectorField {
    pub fn new(grid: Arc<Grid>, components: Vec<Vec<Complex64>>) -> Result<Self> {
        check_components(&grid, &components)?;
        Ok(SpectralVectorField { grid, components })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let components = vec![vec![ZERO; grid.len()]; grid.dim()];
        SpectralVectorField { grid, components }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.components
    }

    /// Coefficient vector at one mode (unused trailing entries are zero in 2-D).
    #[inline]
    pub fn mode(&self, m: usize) -> [Complex64; 3] {
        let mut v = [ZERO; 3];
        for (a, c) in self.components.iter().enumerate() {
            v[a] = c[m];
        }
        v
    }

    #[inline]
    pub fn set_mode(&mut self, m: usize, v: [Complex64; 3]) {
        for (a, c) in self.components.iter_mut().enumerate() {
            c[m] = v[a];
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid.spec(),
                other.grid.spec()
            )));
        }
        Ok(())
    }

    /// Applies `f(mode, coefficient)` to every coefficient of every component.
    pub fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| c.iter().enumerate().map(|(m, &z)| f(m, z)).collect())
            .collect();
        SpectralVectorField {
            grid: self.grid.clone(),
            components,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_, z| z * s)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        self.same_grid(other)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * s).collect())
            .collect();
        Ok(SpectralVectorField {
            grid: self.grid.clone(),
            components,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Largest `|f(k) - conj f(-k)|` relative to the largest coefficient.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in &self.components {
            for (m, z) in c.iter().enumerate() {
                let partner = c[self.grid.mirror(m)];
                defect = defect.max((z - partner.conj()).norm());
                scale = scale.max(z.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    /// Replaces `f(k)` by `(f(k) + conj f(-k)) / 2`, which is exactly conjugate-symmetric.
    pub fn symmetrize(&mut self) {
        for c in self.components.iter_mut() {
            let old = c.clone();
            for (m, z) in c.iter_mut().enumerate() {
                *z = (old[m] + old[self.grid.mirror(m)].conj()) * 0.5;
            }
        }
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn dealias(&mut self) {
        let mask = self.grid.dealias_mask();
        for c in self.components.iter_mut() {
            for (z, &keep) in c.iter_mut().zip(mask) {
                if !keep {
                    *z = ZERO;
                }
            }
        }
    }

    pub fn zero_mean(&mut self) {
        for c in self.components.iter_mut() {
            c[0] = ZERO;
        }
    }

    pub fn is_dealiased(&self) -> bool {
        let mask = self.grid.dealias_mask();
        self.components
            .iter()
            .all(|c| c.iter().zip(mask).all(|(z, &keep)| keep || *z == ZERO))
    }

    pub fn to_real(&self) -> Result<RealVectorField> {
        let defect = self.symmetry_defect();
        if defect > SYMMETRY_TOLERANCE {
            return Err(Error::SymmetryViolation {
                defect,
                tolerance: SYMMETRY_TOLERANCE,
            });
        }
        Ok(self.to_real_unchecked())
    }

    /// Inverse transform taking the real part, for inputs symmetric by construction.
    pub(crate) fn to_real_unchecked(&self) -> RealVectorField {
        let scale = 1.0 / self.grid.volume();
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut data = c.clone();
                self.grid.dft_in_place(&mut data, true);
                data.iter().map(|z| z.re * scale).collect()
            })
            .collect();
        RealVectorField {
            grid: self.grid.clone(),
            components,
        }
    }

    /// Removes the gradient part mode by mode, `f - k (k.f) / |k|^2`; the
    /// zero mode is set to zero.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        let dim = self.dim();
        for m in 0..self.grid.len() {
            let k2 = self.grid.k2(m);
            if m == 0 {
                for c in out.components.iter_mut() {
                    c[0] = ZERO;
                }
                continue;
            }
            if k2 == 0.0 {
                continue;
            }
            let k = self.grid.wavevector(m);
            let mut kf = ZERO;
            for a in 0..dim {
                kf += out.components[a][m] * k[a];
            }
            let s = kf / k2;
            for a in 0..dim {
                out.components[a][m] -= s * k[a];
            }
        }
        out
    }

    /// `i k x f(k)`; 3-D only.
    pub fn curl(&self) -> Result<Self> {
        if self.dim() != 3 {
            return Err(Error::UnsupportedDimension(self.dim()));
        }
        let mut out = SpectralVectorField::zeros(self.grid.clone());
        let i = Complex64::new(0.0, 1.0);
        for m in 0..self.grid.len() {
            let k = self.grid.wavevector(m);
            let f = self.mode(m);
            let c = [
                i * (f[2] * k[1] - f[1] * k[2]),
                i * (f[0] * k[2] - f[2] * k[0]),
                i * (f[1] * k[0] - f[0] * k[1]),
            ];
            out.set_mode(m, c);
        }
        Ok(out)
    }

    /// Spectral divergence `i k . f(k)` as a scalar per mode.
    pub fn divergence(&self) -> Vec<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        (0..self.grid.len())
            .map(|m| {
                let k = self.grid.wavevector(m);
                let f = self.mode(m);
                (0..self.dim()).map(|a| f[a] * k[a]).sum::<Complex64>() * i
            })
            .collect()
    }

    /// `max_k |k.f(k)| / max_k (|k| |f(k)|)`, zero for the zero field.
    pub fn divergence_defect(&self) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for m in 0..self.grid.len() {
            let k = self.grid.wavevector(m);
            let f = self.mode(m);
            let kf: Complex64 = (0..self.dim()).map(|a| f[a] * k[a]).sum();
            let fnorm = (0..self.dim()).map(|a| f[a].norm_sqr()).sum::<f64>().sqrt();
            num = num.max(kf.norm());
            den = den.max(self.grid.k2(m).sqrt() * fnorm);
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub(crate) fn require_divergence_free(&self, tolerance: f64) -> Result<()> {
        let defect = self.divergence_defect();
        if defect > tolerance {
            return Err(Error::NotDivergenceFree { defect, tolerance });
        }
        Ok(())
    }

    pub fn helmholtz_weight(&self, alpha: f64, direction: HelmholtzDirection) -> Self {
        let k2 = self.grid.k2_all();
        match direction {
            HelmholtzDirection::Forward => self.map_modes(|m, z| z * (1.0 + alpha * k2[m])),
            HelmholtzDirection::Inverse => self.map_modes(|m, z| z / (1.0 + alpha * k2[m])),
        }
    }

    /// Partial derivative along `axis`: `i k_axis f(k)`.
    pub fn partial(&self, axis: usize) -> Self {
        let i = Complex64::new(0.0, 1.0);
        self.map_modes(|m, z| z * i * self.grid.wavevector(m)[axis])
    }

    /// Largest coefficient magnitude difference, for tests and diagnostics.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn has_non_finite(&self) -> bool {
        self.components
            .iter()
            .any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_real(grid: &Arc<Grid>, seed: u64) -> RealVectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..grid.dim())
            .map(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        RealVectorField::new(grid.clone(), comps).unwrap()
    }

    fn rel_diff(a: &RealVectorField, b: &RealVectorField) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for (x, y) in a.components().iter().zip(b.components()) {
            for (p, q) in x.iter().zip(y) {
                num = num.max((p - q).abs());
                den = den.max(p.abs());
            }
        }
        num / den
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let z = RealVectorField::zeros(g.clone()).to_spectral();
        assert_eq!(z.max_abs(), 0.0);
        let back = SpectralVectorField::zeros(g).to_real().unwrap();
        assert_eq!(back.max_magnitude(), 0.0);
    }

    #[test]
    fn single_sine_mode_has_one_conjugate_pair() {
        let l = 3.0;
        let g = Grid::new(3, 8, l).unwrap();
        let f = RealVectorField::from_fn(g.clone(), |x| [(2.0 * PI * x[0] / l).sin(), 0.0, 0.0]);
        let fh = f.to_spectral();
        let big: Vec<usize> = (0..g.len())
            .filter(|&m| fh.components()[0][m].norm() > 1e-12)
            .collect();
        assert_eq!(big.len(), 2);
        let dk = g.wavenumber_spacing();
        for &m in &big {
            let k = g.wavevector(m);
            assert!((k[0].abs() - dk).abs() < 1e-12 && k[1] == 0.0 && k[2] == 0.0);
            // sin -> coefficient -i L^3 / 2 at +k
            let expected = l * l * l / 2.0;
            assert!((fh.components()[0][m].norm() - expected).abs() < 1e-12 * expected);
        }
        assert!(fh.components()[1].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn round_trip_real_spectral_real() {
        for (dim, n) in [(2, 16), (3, 8), (3, 12)] {
            let g = Grid::new(dim, n, 5.0).unwrap();
            let f = random_real(&g, 3);
            let back = f.to_spectral().to_real().unwrap();
            assert!(rel_diff(&f, &back) < 1e-12);
        }
    }

    #[test]
    fn round_trip_spectral_real_spectral() {
        let g = Grid::new(3, 8, 2.0).unwrap();
        let fh = random_real(&g, 9).to_spectral();
        let again = fh.to_real().unwrap().to_spectral();
        assert!(fh.max_abs_diff(&again) < 1e-12 * fh.max_abs());
    }

    #[test]
    fn conjugate_pair_gives_cosine() {
        let l = 2.0 * PI;
        let g = Grid::new(3, 8, l).unwrap();
        let mut fh = SpectralVectorField::zeros(g.clone());
        // mode (0, 0, 1) and its mirror
        let m = 1;
        let mm = g.mirror(m);
        fh.components_mut()[0][m] = Complex64::new(1.0, 0.0);
        fh.components_mut()[0][mm] = Complex64::new(1.0, 0.0);
        let f = fh.to_real().unwrap();
        let vol = g.volume();
        for p in 0..g.len() {
            let x = g.position(p);
            let expected = 2.0 * x[2].cos() / vol;
            assert!((f.components()[0][p] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn to_real_rejects_asymmetric_input() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let mut fh = SpectralVectorField::zeros(g);
        fh.components_mut()[1][3] = Complex64::new(1.0, 0.0);
        assert!(matches!(fh.to_real(), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn leray_annihilates_gradients_and_is_idempotent() {
        let g = Grid::new(3, 8, 4.0).unwrap();
        let phi = random_real(&g, 1).to_spectral();
        let i = Complex64::new(0.0, 1.0);
        let mut grad = SpectralVectorField::zeros(g.clone());
        for m in 0..g.len() {
            let k = g.wavevector(m);
            let p = phi.components()[0][m];
            grad.set_mode(m, [i * k[0] * p, i * k[1] * p, i * k[2] * p]);
        }
        assert!(grad.leray_project().max_abs() < 1e-13 * grad.max_abs());

        let f = random_real(&g, 2).to_spectral();
        let p1 = f.leray_project();
        let p2 = p1.leray_project();
        assert!(p1.max_abs_diff(&p2) < 1e-14 * p1.max_abs());
        // exhaustive k . P f = 0
        for m in 0..g.len() {
            let k = g.wavevector(m);
            let v = p1.mode(m);
            let kv: Complex64 = (0..3).map(|a| v[a] * k[a]).sum();
            assert!(kv.norm() <= 1e-12 * p1.max_abs());
        }
        assert_eq!(p1.mode(0), [ZERO; 3]);
    }

    #[test]
    fn curl_of_shear_mode() {
        let l = 2.0 * PI * 3.0;
        let kappa = 2.0 * PI / l;
        let g = Grid::new(3, 8, l).unwrap();
        let f = RealVectorField::from_fn(g.clone(), |x| [(kappa * x[1]).sin(), 0.0, 0.0]);
        let c = f.to_spectral().curl().unwrap();
        let expected = RealVectorField::from_fn(g.clone(), |x| [0.0, 0.0, -kappa * (kappa * x[1]).cos()])
            .to_spectral();
        assert!(c.max_abs_diff(&expected) < 1e-12 * expected.max_abs());
    }

    #[test]
    fn curl_rejects_2d_and_div_curl_vanishes() {
        let g2 = Grid::new(2, 8, 1.0).unwrap();
        assert!(matches!(
            SpectralVectorField::zeros(g2).curl(),
            Err(Error::UnsupportedDimension(2))
        ));
        let g = Grid::new(3, 8, 1.0).unwrap();
        let f = random_real(&g, 4).to_spectral();
        let c = f.curl().unwrap();
        let div = c.divergence();
        let scale = c.max_abs() * g.k2_all().iter().cloned().fold(0.0, f64::max).sqrt();
        assert!(div.iter().all(|z| z.norm() < 1e-13 * scale));
    }

    #[test]
    fn helmholtz_forward_inverse() {
        let g = Grid::new(3, 8, 2.0 * PI).unwrap();
        let f = random_real(&g, 5).to_spectral();
        let fw = f.helmholtz_weight(1.0, HelmholtzDirection::Forward);
        // zero mode unchanged, |k|^2 = 1 mode doubled
        assert_eq!(fw.mode(0), f.mode(0));
        assert_eq!(g.k2(1), 1.0);
        assert_eq!(fw.components()[0][1], f.components()[0][1] * 2.0);
        let back = fw.helmholtz_weight(1.0, HelmholtzDirection::Inverse);
        assert!(back.max_abs_diff(&f) < 1e-14 * f.max_abs());
    }
}
