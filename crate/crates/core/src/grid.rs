//! Periodic tensor-product grid on the box `[-L, L)^N` with spectral calculus.
//!
//! Transform convention: the forward transform is the unnormalized DFT
//! `F_k = sum_m f_m exp(-2 pi i k m / n)` applied along every axis, and the
//! inverse carries the full `1 / n^N` factor, so `inverse(forward(f)) == f`.
//! Axis coordinates are `x_m = -L + m * dx` with `dx = 2L / n`. Wavenumbers are
//! stored in transform order, `k_m = pi * m' / L` with `m' = m` for `m < n/2`
//! and `m' = m - n` otherwise, so every `m'` lies in `[-n/2, n/2)`.
//!
//! First derivatives drop the Nyquist mode `m' = -n/2` (its derivative is not
//! representable as a real field); the Laplacian keeps it with `-k^2`.
//!
//! Integrals use the periodic trapezoidal rule `sum f * dx^N`, which is
//! spectrally accurate for smooth periodic integrands.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic spatial grid with cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
    dx: f64,
    coords: Arc<[f64]>,
    wavenumbers: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid {
    pub fn new(dim: usize, n_per_axis: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if n_per_axis < 16 || !n_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 16, got {n_per_axis}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("half width must be positive, got {half_width}")));
        }
        let n = n_per_axis;
        let dx = 2.0 * half_width / n as f64;
        let coords: Arc<[f64]> = (0..n).map(|m| -half_width + m as f64 * dx).collect();
        let wavenumbers: Arc<[f64]> = (0..n)
            .map(|m| {
                let shifted = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
                std::f64::consts::PI * shifted / half_width
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            dim,
            n,
            half_width,
            dx,
            coords,
            wavenumbers,
            forward,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Total number of grid points, `n^N`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `dx^N`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Coordinates along one axis (identical for every axis).
    pub fn axis_coords(&self) -> &[f64] {
        &self.coords
    }

    /// Wavenumbers along one axis, in transform order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the Nyquist mode along an axis.
    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Row-major stride of `axis` (the last axis is contiguous).
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis index of flat index `idx` along `axis`.
    #[inline]
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.n
    }

    /// Writes the coordinates of grid point `idx` into `out[..dim]`.
    #[inline]
    pub fn point_into(&self, idx: usize, out: &mut [f64]) {
        for (axis, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.coords[self.axis_index(idx, axis)];
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        self.point_into(idx, &mut p);
        p
    }

    /// `|k|^2` at flat spectral index `idx`.
    #[inline]
    pub fn k_squared(&self, idx: usize) -> f64 {
        (0..self.dim)
            .map(|axis| {
                let k = self.wavenumbers[self.axis_index(idx, axis)];
                k * k
            })
            .sum()
    }

    /// Evaluates a real function of position at every grid point.
    pub fn sample<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut p = vec![0.0; self.dim];
        (0..self.len())
            .map(|idx| {
                self.point_into(idx, &mut p);
                f(&p)
            })
            .collect()
    }

    /// Sum of `values * dx^N`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Mass of a nonnegative density outside the inner box `|x_j| <= L/2`.
    pub fn outer_mass(&self, density: &[f64]) -> f64 {
        let limit = 0.5 * self.half_width;
        let inner: Vec<bool> = self.coords.iter().map(|x| x.abs() <= limit).collect();
        let mut total = 0.0;
        for (idx, rho) in density.iter().enumerate() {
            let outside = (0..self.dim).any(|axis| !inner[self.axis_index(idx, axis)]);
            if outside {
                total += rho;
            }
        }
        total * self.cell_volume()
    }

    /// In-place forward transform over all axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// In-place inverse transform over all axes, including the `1/n^N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "field length does not match grid");
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // The last axis is contiguous: rustfft handles back-to-back lines in one call.
        plan.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim - 1 {
            let stride = self.stride(axis);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (m, l) in line.iter_mut().enumerate() {
                        *l = data[start + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, l) in line.iter().enumerate() {
                        data[start + m * stride] = *l;
                    }
                }
            }
        }
    }

    /// Applies a spectral multiplier `m(idx)` to `values` and returns the result.
    pub fn apply_multiplier<M>(&self, values: &[Complex64], multiplier: M) -> Vec<Complex64>
    where
        M: Fn(usize) -> Complex64,
    {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (idx, v) in buf.iter_mut().enumerate() {
            *v *= multiplier(idx);
        }
        self.inverse(&mut buf);
        buf
    }

    fn derivative_multiplier(&self, axis: usize, idx: usize) -> Complex64 {
        let m = self.axis_index(idx, axis);
        if m == self.nyquist_index() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.wavenumbers[m])
        }
    }

    /// Spectral gradient of complex samples, one vector per axis.
    pub fn gradient_values(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut spectrum = values.to_vec();
        self.forward(&mut spectrum);
        (0..self.dim)
            .map(|axis| {
                let mut comp: Vec<Complex64> = spectrum
                    .iter()
                    .enumerate()
                    .map(|(idx, v)| v * self.derivative_multiplier(axis, idx))
                    .collect();
                self.inverse(&mut comp);
                comp
            })
            .collect()
    }

    /// Spectral Laplacian of complex samples.
    pub fn laplacian_values(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.apply_multiplier(values, |idx| Complex64::new(-self.k_squared(idx), 0.0))
    }

    /// Spectral gradient of a real field (real part of the complex result).
    pub fn real_gradient(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.gradient_values(&complex)
            .into_iter()
            .map(|c| c.into_iter().map(|v| v.re).collect())
            .collect()
    }

    /// Spectral Laplacian of a real field.
    pub fn real_laplacian(&self, values: &[f64]) -> Vec<f64> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.laplacian_values(&complex).into_iter().map(|v| v.re).collect()
    }

    /// Spectral divergence of a real vector field.
    pub fn real_divergence(&self, components: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(components.len(), self.dim);
        let mut out = vec![0.0; self.len()];
        for (axis, comp) in components.iter().enumerate() {
            let complex: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let d = self.apply_multiplier(&complex, |idx| self.derivative_multiplier(axis, idx));
            for (o, v) in out.iter_mut().zip(d) {
                *o += v.re;
            }
        }
        out
    }
}

/// Complex amplitude on every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

/// L2, H1 and H1-seminorm of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub h1_semi: f64,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Input("field contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    /// Wraps values produced by spectral operations on an already valid field.
    pub(crate) fn from_parts(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![Complex64::default(); grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn<F>(grid: &Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let mut p = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|idx| {
                grid.point_into(idx, &mut p);
                f(&p)
            })
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `sum conj(self) * other * dx^N`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// `self - other`; grids must match.
    pub fn difference(&self, other: &ComplexField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Usage("fields live on different grids".into()));
        }
        Ok(Self::from_parts(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &ComplexField, b: Complex64) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Rescales to unit L2 norm. Fails on the zero field.
    pub fn normalized(&self) -> Result<Self> {
        let l2 = norms_l2(self);
        if !(l2 > 0.0) {
            return Err(Error::Input("cannot normalize a zero field".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / l2, 0.0)))
    }
}

/// Spectral gradient, one component per axis.
pub fn spectral_gradient(f: &ComplexField) -> Vec<ComplexField> {
    f.grid
        .gradient_values(&f.values)
        .into_iter()
        .map(|v| ComplexField::from_parts(f.grid.clone(), v))
        .collect()
}

/// Spectral Laplacian (multiplier `-|k|^2`).
pub fn spectral_laplacian(f: &ComplexField) -> ComplexField {
    ComplexField::from_parts(f.grid.clone(), f.grid.laplacian_values(&f.values))
}

fn norms_l2(f: &ComplexField) -> f64 {
    (f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid.cell_volume()).sqrt()
}

/// L2 norm, H1 seminorm (spectral gradient) and full H1 norm.
pub fn norms(f: &ComplexField) -> Norms {
    let l2 = norms_l2(f);
    let semi_sq: f64 = spectral_gradient(f)
        .iter()
        .map(|g| norms_l2(g).powi(2))
        .sum();
    Norms {
        l2,
        h1_semi: semi_sq.sqrt(),
        h1: (l2 * l2 + semi_sq).sqrt(),
    }
}

/// L2 norm evaluated from transform coefficients (Parseval).
pub fn spectral_l2(f: &ComplexField) -> f64 {
    let mut buf = f.values.clone();
    f.grid.forward(&mut buf);
    let sum: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    (sum / f.grid.len() as f64 * f.grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_examples() {
        assert_eq!(Grid::new(1, 16, 8.0).unwrap().dx(), 1.0);
        let g = Grid::new(2, 64, 10.0).unwrap();
        assert_eq!(g.dx(), 0.3125);
        assert_eq!(g.dx() * 64.0, 20.0);
        assert!(matches!(Grid::new(1, 17, 8.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(4, 16, 8.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1, 8, 8.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(1, 16, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn wavenumbers_cover_half_open_range() {
        let g = Grid::new(1, 16, 8.0).unwrap();
        let unit = PI / 8.0;
        let m: Vec<i64> = g.wavenumbers().iter().map(|k| (k / unit).round() as i64).collect();
        assert_eq!(m[0], 0);
        assert_eq!(m[7], 7);
        assert_eq!(m[8], -8);
        assert_eq!(m[15], -1);
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let f = ComplexField::from_fn(&g, |_| Complex64::new(2.5, -1.0)).unwrap();
        for comp in spectral_gradient(&f) {
            assert!(comp.values().iter().all(|v| v.norm() < 1e-14));
        }
        assert!(spectral_laplacian(&f).values().iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn plane_wave_is_an_eigenfunction() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let k = 5.0 * PI / 8.0;
        let f = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0])).unwrap();
        let grad = spectral_gradient(&f);
        let lap = spectral_laplacian(&f);
        for (i, v) in f.values().iter().enumerate() {
            assert!((grad[0].values()[i] - Complex64::i() * k * v).norm() < 1e-12);
            assert!((lap.values()[i] + k * k * v).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_fourth_order_differences() {
        let g = Grid::new(1, 128, 8.0).unwrap();
        let l = g.half_width();
        let f = ComplexField::from_fn(&g, |x| Complex64::new((PI * x[0] / l).sin(), 0.0)).unwrap();
        let grad = spectral_gradient(&f);
        let v = f.values();
        let n = v.len();
        let h = g.dx();
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            let at = |o: isize| v[((i as isize + o).rem_euclid(n as isize)) as usize].re;
            let fd = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
            max_err = max_err.max((fd - grad[0].values()[i].re).abs());
        }
        // Truncation of the stencil: (h^4 / 30) * max|f'''''| with |f'''''| = (pi/L)^5.
        let bound = h.powi(4) / 30.0 * (PI / l).powi(5) * 1.01;
        assert!(max_err <= bound, "{max_err} > {bound}");
    }

    #[test]
    fn gaussian_laplacian_matches_closed_form() {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0))
            .unwrap();
        let lap = spectral_laplacian(&f);
        let max_err = g
            .axis_coords()
            .iter()
            .zip(lap.values())
            .map(|(x, v)| (v.re - (x * x - 1.0) * (-x * x / 2.0).exp()).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-8, "{max_err}");
    }

    #[test]
    fn plane_wave_norms() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 32, 4.0).unwrap();
            let k = [3.0 * PI / 4.0, -2.0 * PI / 4.0];
            let amp = (2.0 * g.half_width()).powf(-(dim as f64) / 2.0);
            let f = ComplexField::from_fn(&g, |x| {
                let phase: f64 = x.iter().zip(k).map(|(x, k)| x * k).sum();
                Complex64::from_polar(amp, phase)
            })
            .unwrap();
            let kn = k[..dim].iter().map(|k| k * k).sum::<f64>().sqrt();
            let nr = norms(&f);
            assert!((nr.l2 - 1.0).abs() < 1e-12);
            assert!((nr.h1_semi - kn).abs() < 1e-12);
            assert!((nr.h1 - (1.0 + kn * kn).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_norms() {
        let g = Grid::new(3, 16, 2.0).unwrap();
        let nr = norms(&ComplexField::zeros(&g));
        assert_eq!((nr.l2, nr.h1, nr.h1_semi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_fields() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        assert!(ComplexField::new(g.clone(), vec![Complex64::default(); 15]).is_err());
        let mut v = vec![Complex64::default(); 16];
        v[3] = Complex64::new(f64::NAN, 0.0);
        assert!(ComplexField::new(g, v).is_err());
    }

    #[test]
    fn laplacian_is_divergence_of_gradient_in_3d() {
        let g = Grid::new(3, 64, 10.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::from_polar((-r2 / 2.0).exp(), 0.3 * x[0] - 0.2 * x[2])
        })
        .unwrap();
        let grad = spectral_gradient(&f);
        let mut div = vec![Complex64::default(); g.len()];
        for (axis, comp) in grad.iter().enumerate() {
            let d = spectral_gradient(comp);
            for (o, v) in div.iter_mut().zip(d[axis].values()) {
                *o += v;
            }
        }
        let lap = spectral_laplacian(&f);
        let scale = lap.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = lap
            .values()
            .iter()
            .zip(&div)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err / scale < 1e-10, "{}", err / scale);
    }

    #[test]
    fn outer_mass_counts_any_axis_outside() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        let rho = vec![1.0; g.len()];
        // Inner box |x| <= 4 holds 9 of 16 points per axis (-4..=4 step 1).
        let inner = 9.0 * 9.0;
        let expected = (256.0 - inner) * g.cell_volume();
        assert!((g.outer_mass(&rho) - expected).abs() < 1e-12);
    }
}
