//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::potential::{SpatialProfile, TemporalProfile, TimePeriodicPotential};
use crate::solver::{initialize, InitialState, WaveFunction, MIN_STEPS_PER_FAST_PERIOD};

/// Smallest ensemble used for measure statistics.
pub const MIN_ENSEMBLE_SIZE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemporalSpec {
    Constant { value: f64 },
    Cosine { amplitude: f64 },
    Sine { amplitude: f64 },
    ExpSine { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialSpec {
    Zero,
    Harmonic { stiffness: f64 },
    GaussianWell { depth: f64, width: f64 },
    CosineLattice { amplitude: f64, wavenumber: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub temporal: TemporalSpec,
    pub spatial: SpatialSpec,
    /// Overrides the closed-form mean of the temporal profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_mean: Option<f64>,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
}

/// Initial data. `wkb` is a Gaussian amplitude with the phase
/// `k . x + chirp |x - center|^2 / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        momentum: Vec<f64>,
    },
    Wkb {
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        momentum: Vec<f64>,
        #[serde(default)]
        chirp: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_spf")]
    pub steps_per_fast_period: usize,
    /// RK step of the trajectories in units of the wave step.
    #[serde(default = "default_stride")]
    pub trajectory_stride: usize,
    #[serde(default = "default_boundary")]
    pub boundary_mass_limit: f64,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            steps_per_fast_period: default_spf(),
            trajectory_stride: default_stride(),
            boundary_mass_limit: default_boundary(),
            blowup_factor: default_blowup(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    pub eps_list: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub delta_list: Vec<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    /// Number of snapshot intervals on `[0, horizon]`.
    #[serde(default = "default_snapshots")]
    pub snapshot_count: usize,
    #[serde(default = "default_dictionary")]
    pub dictionary_size: usize,
    /// Amplitude of the initial perturbation `psi0 + perturbation * eps * chi`; 0 disables it.
    #[serde(default)]
    pub perturbation: f64,
    /// Write binary field snapshots next to the report.
    #[serde(default)]
    pub write_fields: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

fn default_quad_order() -> usize {
    64
}
fn default_spf() -> usize {
    MIN_STEPS_PER_FAST_PERIOD
}
fn default_stride() -> usize {
    4
}
fn default_boundary() -> f64 {
    1e-8
}
fn default_blowup() -> f64 {
    10.0
}
fn default_deltas() -> Vec<f64> {
    vec![0.05]
}
fn default_ensemble() -> usize {
    2000
}
fn default_snapshots() -> usize {
    64
}
fn default_dictionary() -> usize {
    256
}

impl TemporalSpec {
    pub fn profile(&self) -> TemporalProfile {
        match *self {
            Self::Constant { value } => TemporalProfile::Constant { value },
            Self::Cosine { amplitude } => TemporalProfile::Cosine { amplitude },
            Self::Sine { amplitude } => TemporalProfile::Sine { amplitude },
            Self::ExpSine { amplitude } => TemporalProfile::ExpSine { amplitude },
        }
    }
}

impl SpatialSpec {
    pub fn profile(&self) -> SpatialProfile {
        match *self {
            Self::Zero => SpatialProfile::Zero,
            Self::Harmonic { stiffness } => SpatialProfile::Harmonic { stiffness },
            Self::GaussianWell { depth, width } => SpatialProfile::GaussianWell { depth, width },
            Self::CosineLattice {
                amplitude,
                wavenumber,
            } => SpatialProfile::CosineLattice {
                amplitude,
                wavenumber,
            },
        }
    }
}

impl InitialSpec {
    fn parts(&self) -> (&[f64], f64, &[f64]) {
        match self {
            Self::Gaussian {
                center,
                width,
                momentum,
            }
            | Self::Wkb {
                center,
                width,
                momentum,
                ..
            } => (center, *width, momentum),
        }
    }

    pub fn state(&self, dim: usize) -> InitialState {
        let (center, width, momentum) = self.parts();
        let momentum = if momentum.is_empty() {
            vec![0.0; dim]
        } else {
            momentum.to_vec()
        };
        match self {
            Self::Gaussian { .. } => InitialState::GaussianPacket {
                center: center.to_vec(),
                width,
                momentum,
            },
            Self::Wkb { chirp, .. } => {
                let c = center.to_vec();
                let c2 = c.clone();
                let chirp = *chirp;
                InitialState::Wkb {
                    density: std::sync::Arc::new(move |x: &[f64]| {
                        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                        (-r2 / (2.0 * width * width)).exp()
                    }),
                    phase: std::sync::Arc::new(move |x: &[f64]| {
                        let mut s = 0.0;
                        for j in 0..x.len() {
                            let d = x[j] - c2[j];
                            s += momentum[j] * x[j] + 0.5 * chirp * d * d;
                        }
                        s
                    }),
                }
            }
        }
    }
}

impl ExperimentConfig {
    /// `a = 1 + cos 2 pi s`, `W = x^2 / 2`, unit-width Gaussian at rest,
    /// 1D, `L = 16`, `n = 512`, `T = 1`, `eps` in {0.2, 0.1, 0.05, 0.025}.
    pub fn harmonic_benchmark() -> Self {
        Self {
            seed: 20240501,
            horizon: 1.0,
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            delta_list: vec![0.05],
            ensemble_size: 2000,
            snapshot_count: 64,
            dictionary_size: 256,
            perturbation: 0.0,
            write_fields: false,
            output_dir: None,
            grid: GridSpec {
                dim: 1,
                n: 512,
                half_width: 16.0,
            },
            potential: PotentialSpec {
                temporal: TemporalSpec::Cosine { amplitude: 1.0 },
                spatial: SpatialSpec::Harmonic { stiffness: 1.0 },
                analytic_mean: None,
                quad_order: 64,
            },
            initial: InitialSpec::Gaussian {
                center: vec![0.0],
                width: 1.0,
                momentum: vec![0.0],
            },
            solver: SolverSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.eps_list.is_empty() {
            return fail("eps_list must not be empty".into());
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return fail("every eps must lie in (0, 1]".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return fail("eps_list must be strictly decreasing".into());
        }
        if self.delta_list.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return fail("every delta must be positive".into());
        }
        if self.ensemble_size < MIN_ENSEMBLE_SIZE {
            return fail(format!(
                "ensemble_size must be at least {MIN_ENSEMBLE_SIZE}, got {}",
                self.ensemble_size
            ));
        }
        if self.snapshot_count < 2 {
            return fail("snapshot_count must be at least 2".into());
        }
        if self.dictionary_size == 0 {
            return fail("dictionary_size must be at least 1".into());
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return fail("perturbation must be a nonnegative number".into());
        }
        if self.potential.quad_order < 8 {
            return fail("potential.quad_order must be at least 8".into());
        }
        if self.solver.steps_per_fast_period < MIN_STEPS_PER_FAST_PERIOD {
            return fail(format!(
                "solver.steps_per_fast_period must be at least {MIN_STEPS_PER_FAST_PERIOD}"
            ));
        }
        if self.solver.trajectory_stride < 4 {
            return fail("solver.trajectory_stride must be at least 4".into());
        }
        if !(self.solver.boundary_mass_limit > 0.0) || !(self.solver.blowup_factor > 1.0) {
            return fail("solver monitor limits must be positive (blow-up factor > 1)".into());
        }
        let grid = self.build_grid()?;
        let (center, width, momentum) = self.initial.parts();
        if center.len() != grid.dim() || !(momentum.is_empty() || momentum.len() == grid.dim()) {
            return fail(format!("initial center/momentum need {} components", grid.dim()));
        }
        if !(width > 0.0) {
            return fail("initial width must be positive".into());
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.half_width)
    }

    pub fn build_potential(&self) -> TimePeriodicPotential {
        let p = TimePeriodicPotential::new(
            self.potential.temporal.profile(),
            self.potential.spatial.profile(),
        );
        match self.potential.analytic_mean {
            Some(m) => p.with_analytic_mean(Some(m)),
            None => p,
        }
    }

    /// `psi0`, and `psi0^eps = normalize(psi0 + perturbation * eps * chi)`
    /// with `chi = (x_1 - c_1) / width` times the initial Gaussian envelope.
    pub fn initial_states(&self, grid: &Grid, eps: f64) -> Result<(WaveFunction, WaveFunction)> {
        let psi0 = initialize(&self.initial.state(grid.dim()), grid)?;
        if self.perturbation == 0.0 {
            return Ok((psi0.clone(), psi0));
        }
        let (center, width, _) = self.initial.parts();
        let chi = ComplexField::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            Complex64::new((x[0] - center[0]) / width * (-r2 / (4.0 * width * width)).exp(), 0.0)
        })?
        .normalized()?;
        let mixed = psi0
            .field
            .combine(Complex64::new(1.0, 0.0), &chi, Complex64::new(self.perturbation * eps, 0.0))
            .normalized()?;
        Ok((WaveFunction::new(mixed, 0.0), psi0))
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
