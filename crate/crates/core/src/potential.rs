//! Separable time-periodic potentials `V(s, x) = a(s) W(x)` with unit period in
//! `s`, and the time-averaged potential `V*(x) = (int_0^1 a) W(x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{composite_unit, gauss_legendre_unit};

/// Nodes per panel in every Gauss–Legendre rule used for time integrals.
pub const GAUSS_PANEL_ORDER: usize = 8;

/// Relative tolerance between a quadrature mean and a supplied analytic mean.
pub const MEAN_CONSISTENCY_TOL: f64 = 1e-10;

/// Default ceiling on `max |d^2 V / dx_i dx_j|` for a potential to pass the
/// subquadratic check on a finite box.
pub const DEFAULT_CURVATURE_LIMIT: f64 = 1e6;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpatialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Unit-period temporal factor `a(s)`.
#[derive(Clone)]
pub enum TemporalProfile {
    /// `a(s) = value`.
    Constant { value: f64 },
    /// `a(s) = 1 + amplitude cos(2 pi s)`.
    Cosine { amplitude: f64 },
    /// `a(s) = 1 + amplitude sin(2 pi s)`.
    Sine { amplitude: f64 },
    /// `a(s) = exp(amplitude sin(2 pi s))`.
    ExpSine { amplitude: f64 },
    /// Arbitrary 1-periodic function; the caller guarantees periodicity.
    Custom(ScalarFn),
}

impl fmt::Debug for TemporalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { value } => write!(f, "Constant({value})"),
            Self::Cosine { amplitude } => write!(f, "Cosine({amplitude})"),
            Self::Sine { amplitude } => write!(f, "Sine({amplitude})"),
            Self::ExpSine { amplitude } => write!(f, "ExpSine({amplitude})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Modified Bessel function `I_0(z)` from its power series.
pub fn bessel_i0(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

impl TemporalProfile {
    pub fn value(&self, s: f64) -> f64 {
        let theta = 2.0 * PI * s;
        match self {
            Self::Constant { value } => *value,
            Self::Cosine { amplitude } => 1.0 + amplitude * theta.cos(),
            Self::Sine { amplitude } => 1.0 + amplitude * theta.sin(),
            Self::ExpSine { amplitude } => (amplitude * theta.sin()).exp(),
            Self::Custom(f) => f(s),
        }
    }

    /// `int_0^1 a(s) ds` when known in closed form.
    pub fn known_mean(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(*value),
            Self::Cosine { .. } | Self::Sine { .. } => Some(1.0),
            Self::ExpSine { amplitude } => Some(bessel_i0(*amplitude)),
            Self::Custom(_) => None,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Cosine { amplitude } | Self::Sine { amplitude } | Self::ExpSine { amplitude } => {
                *amplitude == 0.0
            }
            Self::Custom(_) => false,
        }
    }

    /// `int_t^{t+dt} a(s / eps) ds`, exact for profiles with a closed-form
    /// antiderivative and by an 8-point Gauss rule otherwise. `dt` may be negative.
    pub fn fast_integral(&self, t: f64, dt: f64, eps: f64) -> f64 {
        let w = 2.0 * PI / eps;
        match self {
            Self::Constant { value } => value * dt,
            Self::Cosine { amplitude } => {
                dt + amplitude / w * ((w * (t + dt)).sin() - (w * t).sin())
            }
            Self::Sine { amplitude } => {
                dt - amplitude / w * ((w * (t + dt)).cos() - (w * t).cos())
            }
            Self::ExpSine { .. } | Self::Custom(_) => {
                let (nodes, weights) = gauss_legendre_unit(GAUSS_PANEL_ORDER);
                dt * nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, wgt)| wgt * self.value((t + dt * x) / eps))
                    .sum::<f64>()
            }
        }
    }

    /// Composite Gauss–Legendre mean over one period with `quad_order` nodes
    /// (rounded up to whole 8-point panels).
    pub fn quadrature_mean(&self, quad_order: usize) -> f64 {
        let panels = quad_order.div_ceil(GAUSS_PANEL_ORDER).max(1);
        let (nodes, weights) = composite_unit(panels, GAUSS_PANEL_ORDER);
        nodes.iter().zip(&weights).map(|(s, w)| w * self.value(*s)).sum()
    }
}

/// Spatial factor `W(x)`.
#[derive(Clone)]
pub enum SpatialProfile {
    Zero,
    /// `W(x) = stiffness |x|^2 / 2`.
    Harmonic { stiffness: f64 },
    /// `W(x) = -depth exp(-|x|^2 / (2 width^2))`.
    GaussianWell { depth: f64, width: f64 },
    /// `W(x) = amplitude sum_j cos(wavenumber x_j)`.
    CosineLattice { amplitude: f64, wavenumber: f64 },
    Custom(SpatialFn),
}

impl fmt::Debug for SpatialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Harmonic { stiffness } => write!(f, "Harmonic({stiffness})"),
            Self::GaussianWell { depth, width } => write!(f, "GaussianWell({depth}, {width})"),
            Self::CosineLattice {
                amplitude,
                wavenumber,
            } => write!(f, "CosineLattice({amplitude}, {wavenumber})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SpatialProfile {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Harmonic { stiffness } => 0.5 * stiffness * x.iter().map(|v| v * v).sum::<f64>(),
            Self::GaussianWell { depth, width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                -depth * (-r2 / (2.0 * width * width)).exp()
            }
            Self::CosineLattice {
                amplitude,
                wavenumber,
            } => amplitude * x.iter().map(|v| (wavenumber * v).cos()).sum::<f64>(),
            Self::Custom(f) => f(x),
        }
    }

    /// Writes `grad W(x)` into `out[..x.len()]`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Zero => out[..x.len()].fill(0.0),
            Self::Harmonic { stiffness } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = stiffness * v;
                }
            }
            Self::GaussianWell { depth, width } => {
                let w2 = width * width;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let e = depth * (-r2 / (2.0 * w2)).exp() / w2;
                for (o, v) in out.iter_mut().zip(x) {
                    *o = e * v;
                }
            }
            Self::CosineLattice {
                amplitude,
                wavenumber,
            } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -amplitude * wavenumber * (wavenumber * v).sin();
                }
            }
            Self::Custom(_) => {
                let h = 1e-4;
                let mut p = x.to_vec();
                for axis in 0..x.len() {
                    let mut at = |offset: f64| {
                        p[axis] = x[axis] + offset;
                        let v = self.value(&p);
                        p[axis] = x[axis];
                        v
                    };
                    out[axis] =
                        (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
                }
            }
        }
    }
}

/// Real potential sampled on a grid (houses `V*` and frozen-time `V(s, .)`).
#[derive(Clone, Debug, PartialEq)]
pub struct StaticPotential {
    grid: Grid,
    values: Vec<f64>,
}

impl StaticPotential {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input("potential size does not match grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("potential contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> Result<Self> {
        Self::new(grid.clone(), grid.sample(f))
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Outcome of [`TimePeriodicPotential::check_subquadratic`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubquadraticReport {
    pub min_value: f64,
    pub max_second_derivative: f64,
    pub ok: bool,
}

/// `V(s, x) = a(s) W(x)`, 1-periodic in `s`.
#[derive(Clone, Debug)]
pub struct TimePeriodicPotential {
    pub temporal: TemporalProfile,
    pub spatial: SpatialProfile,
    pub analytic_mean: Option<f64>,
}

impl TimePeriodicPotential {
    /// The analytic mean defaults to the profile's closed-form value, if any.
    pub fn new(temporal: TemporalProfile, spatial: SpatialProfile) -> Self {
        let analytic_mean = temporal.known_mean();
        Self {
            temporal,
            spatial,
            analytic_mean,
        }
    }

    pub fn with_analytic_mean(mut self, mean: Option<f64>) -> Self {
        self.analytic_mean = mean;
        self
    }

    pub fn time_independent(spatial: SpatialProfile) -> Self {
        Self::new(TemporalProfile::Constant { value: 1.0 }, spatial)
    }

    pub fn is_time_independent(&self) -> bool {
        self.temporal.is_time_independent()
    }

    /// `W` on the grid; rejects non-finite samples.
    pub fn spatial_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        let w = grid.sample(|x| self.spatial.value(x));
        if let Some(idx) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "spatial profile is not finite at {:?}",
                grid.point(idx)
            )));
        }
        Ok(w)
    }

    /// Frozen-time potential `a(s) W(x_i)`.
    pub fn evaluate(&self, s: f64, grid: &Grid) -> Result<StaticPotential> {
        let a = self.temporal.value(s);
        let values = self.spatial_values(grid)?.into_iter().map(|w| a * w).collect();
        StaticPotential::new(grid.clone(), values)
    }

    /// Period mean of `a`, checked against `analytic_mean` when present.
    pub fn temporal_mean(&self, quad_order: usize) -> Result<f64> {
        if quad_order < GAUSS_PANEL_ORDER {
            return Err(Error::Config(format!("quadrature order must be >= 8, got {quad_order}")));
        }
        // A constant has its mean exactly; quadrature would only add rounding.
        let quadrature = match self.temporal {
            TemporalProfile::Constant { value } => value,
            _ => self.temporal.quadrature_mean(quad_order),
        };
        if let Some(analytic) = self.analytic_mean {
            if (quadrature - analytic).abs() > MEAN_CONSISTENCY_TOL * analytic.abs().max(1.0) {
                return Err(Error::Inconsistent {
                    quadrature,
                    analytic,
                });
            }
        }
        Ok(quadrature)
    }

    /// `V*(x_i) = (int_0^1 a) W(x_i)`.
    pub fn effective_potential(&self, grid: &Grid, quad_order: usize) -> Result<StaticPotential> {
        let mean = self.temporal_mean(quad_order)?;
        let values = self.spatial_values(grid)?.into_iter().map(|w| mean * w).collect();
        StaticPotential::new(grid.clone(), values)
    }

    /// Bounds the Hessian of `V` on the grid and its minimum over sampled `s`.
    pub fn check_subquadratic(&self, grid: &Grid, samples_s: usize) -> Result<SubquadraticReport> {
        self.check_subquadratic_with_limit(grid, samples_s, DEFAULT_CURVATURE_LIMIT)
    }

    /// Second derivatives come from fourth-order centered differences of the
    /// analytic profile with step `dx`; a periodic spectral derivative would see
    /// the artificial kink that a growing `W` has at the box edge.
    pub fn check_subquadratic_with_limit(
        &self,
        grid: &Grid,
        samples_s: usize,
        curvature_limit: f64,
    ) -> Result<SubquadraticReport> {
        let samples_s = samples_s.max(1);
        let a_values: Vec<f64> = (0..samples_s)
            .map(|i| self.temporal.value(i as f64 / samples_s as f64))
            .collect();
        let max_a = a_values.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let (a_min, a_max) = a_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)));

        let w = self.spatial_values(grid)?;
        let min_value = w
            .iter()
            .map(|&w| (a_min * w).min(a_max * w))
            .fold(f64::INFINITY, f64::min);

        let h = grid.dx();
        let dim = grid.dim();
        let mut max_hessian = 0.0_f64;
        let mut x = vec![0.0; dim];
        let mut p = vec![0.0; dim];
        for idx in 0..grid.len() {
            grid.point_into(idx, &mut x);
            for i in 0..dim {
                for j in i..dim {
                    let d = if i == j {
                        let mut at = |o: f64| {
                            p.copy_from_slice(&x);
                            p[i] += o;
                            self.spatial.value(&p)
                        };
                        (-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h)
                            - at(-2.0 * h))
                            / (12.0 * h * h)
                    } else {
                        let mut at = |oi: f64, oj: f64| {
                            p.copy_from_slice(&x);
                            p[i] += oi;
                            p[j] += oj;
                            self.spatial.value(&p)
                        };
                        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
                    };
                    if !d.is_finite() {
                        return Err(Error::Validity(format!(
                            "second derivative not finite at {x:?}"
                        )));
                    }
                    max_hessian = max_hessian.max(d.abs());
                }
            }
        }
        let max_second_derivative = max_hessian * max_a;
        if !max_second_derivative.is_finite() || !min_value.is_finite() {
            return Err(Error::Validity("potential bounds are not finite".into()));
        }
        Ok(SubquadraticReport {
            min_value,
            max_second_derivative,
            ok: max_second_derivative <= curvature_limit,
        })
    }
}
