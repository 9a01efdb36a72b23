//! Strang-split spectral propagation of the oscillating system
//! `i d_t psi = -1/2 Lap psi + V(t/eps, x) psi` and of its effective system
//! with the time-averaged potential `V*`.
//!
//! One step is: half kinetic (`exp(-i |k|^2 dt / 4)` in Fourier space), full
//! potential phase `exp(-i Phi(x))`, half kinetic. For the oscillating system
//! `Phi(x) = W(x) int_t^{t+dt} a(s/eps) ds` is the exact time integral of the
//! potential over the step; for the effective system `Phi = V* dt`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{norms, ComplexField, Grid};
use crate::potential::{SpatialFn, StaticPotential, TemporalProfile, TimePeriodicPotential};

/// Minimum number of steps per fast period `eps`.
pub const MIN_STEPS_PER_FAST_PERIOD: usize = 32;

/// Wave function snapshot at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    pub field: ComplexField,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(field: ComplexField, time: f64) -> Self {
        Self { field, time }
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }
}

/// Step size and fast-scale resolution rule. Splitting is always Strang.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub steps_per_fast_period: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, steps_per_fast_period: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if steps_per_fast_period < MIN_STEPS_PER_FAST_PERIOD {
            return Err(Error::Config(format!(
                "steps per fast period must be >= {MIN_STEPS_PER_FAST_PERIOD}, got {steps_per_fast_period}"
            )));
        }
        Ok(Self {
            dt,
            steps_per_fast_period,
        })
    }

    /// Checks `dt <= eps / steps_per_fast_period` (with a relative slack of 1e-12).
    pub fn check_fast_period(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        let limit = eps / self.steps_per_fast_period as f64;
        if self.dt.abs() > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} exceeds eps / steps_per_fast_period = {limit}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Initial data.
#[derive(Clone)]
pub enum InitialState {
    /// `(2 pi w^2)^{-N/4} exp(-|x - c|^2 / (4 w^2)) exp(i k . x)`.
    GaussianPacket {
        center: Vec<f64>,
        width: f64,
        momentum: Vec<f64>,
    },
    /// `sqrt(rho0(x)) exp(i S0(x))`, normalized on the grid.
    Wkb { density: SpatialFn, phase: SpatialFn },
}

impl std::fmt::Debug for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::GaussianPacket {
                center,
                width,
                momentum,
            } => f
                .debug_struct("GaussianPacket")
                .field("center", center)
                .field("width", width)
                .field("momentum", momentum)
                .finish(),
            Self::Wkb { .. } => write!(f, "Wkb"),
        }
    }
}

/// Largest boundary mass tolerated when placing an initial state.
pub const PLACEMENT_MASS_LIMIT: f64 = 1e-8;

pub fn initialize(state: &InitialState, grid: &Grid) -> Result<WaveFunction> {
    let dim = grid.dim();
    let field = match state {
        InitialState::GaussianPacket {
            center,
            width,
            momentum,
        } => {
            if center.len() != dim || momentum.len() != dim {
                return Err(Error::Config(format!(
                    "packet center/momentum need {dim} components"
                )));
            }
            if !(*width > 0.0) {
                return Err(Error::Config(format!("packet width must be positive, got {width}")));
            }
            let points = 2.0 * width / grid.dx();
            if points < 8.0 {
                return Err(Error::Resolution {
                    width: *width,
                    points,
                });
            }
            let norm = (2.0 * std::f64::consts::PI * width * width).powf(-(dim as f64) / 4.0);
            ComplexField::from_fn(grid, |x| {
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for j in 0..dim {
                    let d = x[j] - center[j];
                    r2 += d * d;
                    phase += momentum[j] * x[j];
                }
                Complex64::from_polar(norm * (-r2 / (4.0 * width * width)).exp(), phase)
            })?
        }
        InitialState::Wkb { density, phase } => ComplexField::from_fn(grid, |x| {
            Complex64::from_polar(density(x).max(0.0).sqrt(), phase(x))
        })?,
    };
    let field = field.normalized()?;
    let mass = grid.outer_mass(&field.density());
    if mass > PLACEMENT_MASS_LIMIT {
        return Err(Error::Placement { mass });
    }
    Ok(WaveFunction::new(field, 0.0))
}

/// The equation to propagate.
#[derive(Clone, Debug)]
pub enum System {
    Oscillating {
        potential: TimePeriodicPotential,
        eps: f64,
    },
    Effective { vstar: StaticPotential },
}

#[derive(Clone, Debug)]
enum PotentialPhase {
    Oscillating {
        temporal: TemporalProfile,
        spatial: Arc<[f64]>,
        eps: f64,
    },
    Effective { vstar: Arc<[f64]> },
}

/// Precomputed stepper for one system and one step size.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: Grid,
    dt: f64,
    half_kinetic: Arc<[Complex64]>,
    phase: PotentialPhase,
}

impl Propagator {
    pub fn new(grid: &Grid, system: &System, cfg: &SolverConfig) -> Result<Self> {
        match system {
            System::Oscillating { potential, eps } => {
                cfg.check_fast_period(*eps)?;
                Self::oscillating_unchecked(grid, potential, *eps, cfg.dt)
            }
            System::Effective { vstar } => {
                if vstar.grid() != grid {
                    return Err(Error::Usage("effective potential lives on another grid".into()));
                }
                Ok(Self::build(
                    grid,
                    cfg.dt,
                    PotentialPhase::Effective {
                        vstar: vstar.values().into(),
                    },
                ))
            }
        }
    }

    fn oscillating_unchecked(
        grid: &Grid,
        potential: &TimePeriodicPotential,
        eps: f64,
        dt: f64,
    ) -> Result<Self> {
        Ok(Self::build(
            grid,
            dt,
            PotentialPhase::Oscillating {
                temporal: potential.temporal.clone(),
                spatial: potential.spatial_values(grid)?.into(),
                eps,
            },
        ))
    }

    fn build(grid: &Grid, dt: f64, phase: PotentialPhase) -> Self {
        let half_kinetic = (0..grid.len())
            .map(|idx| Complex64::from_polar(1.0, -grid.k_squared(idx) * dt / 4.0))
            .collect();
        Self {
            grid: grid.clone(),
            dt,
            half_kinetic,
            phase,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Same system stepping backwards in time.
    pub fn reversed(&self) -> Self {
        let mut r = self.clone();
        r.dt = -self.dt;
        r.half_kinetic = self.half_kinetic.iter().map(|c| c.conj()).collect();
        r
    }

    /// Advances `psi` by one step in place.
    pub fn step(&self, psi: &mut WaveFunction) {
        let grid = &self.grid;
        let values = psi.field.values_mut();
        grid.forward(values);
        for (v, k) in values.iter_mut().zip(self.half_kinetic.iter()) {
            *v *= k;
        }
        grid.inverse(values);
        match &self.phase {
            PotentialPhase::Oscillating {
                temporal,
                spatial,
                eps,
            } => {
                let integral = temporal.fast_integral(psi.time, self.dt, *eps);
                for (v, w) in values.iter_mut().zip(spatial.iter()) {
                    *v *= Complex64::from_polar(1.0, -w * integral);
                }
            }
            PotentialPhase::Effective { vstar } => {
                for (v, w) in values.iter_mut().zip(vstar.iter()) {
                    *v *= Complex64::from_polar(1.0, -w * self.dt);
                }
            }
        }
        grid.forward(values);
        for (v, k) in values.iter_mut().zip(self.half_kinetic.iter()) {
            *v *= k;
        }
        grid.inverse(values);
        psi.time += self.dt;
    }
}

/// One Strang step of the oscillating system.
pub fn step_oscillating(
    psi: &WaveFunction,
    potential: &TimePeriodicPotential,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<WaveFunction> {
    let system = System::Oscillating {
        potential: potential.clone(),
        eps,
    };
    let prop = Propagator::new(psi.grid(), &system, cfg)?;
    let mut out = psi.clone();
    prop.step(&mut out);
    Ok(out)
}

/// One Strang step of the effective system.
pub fn step_effective(
    psi: &WaveFunction,
    vstar: &StaticPotential,
    cfg: &SolverConfig,
) -> Result<WaveFunction> {
    let prop = Propagator::new(
        psi.grid(),
        &System::Effective {
            vstar: vstar.clone(),
        },
        cfg,
    )?;
    let mut out = psi.clone();
    prop.step(&mut out);
    Ok(out)
}

/// Abort thresholds checked at every snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorLimits {
    /// Largest mass allowed outside `|x_j| <= L/2`.
    pub boundary_mass: f64,
    /// Largest allowed ratio of the H1 norm to its initial value.
    pub blowup_factor: f64,
}

impl Default for MonitorLimits {
    fn default() -> Self {
        Self {
            boundary_mass: 1e-8,
            blowup_factor: 10.0,
        }
    }
}

/// Snapshots plus the monitor readings taken at each of them.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub snapshots: Vec<WaveFunction>,
    pub boundary_mass: Vec<f64>,
    pub h1_norms: Vec<f64>,
}

/// Converts a time to a whole number of steps, rejecting off-mesh times.
pub fn steps_for(time: f64, dt: f64) -> Result<usize> {
    let steps = (time / dt).round();
    if steps < 0.0 || (steps * dt - time).abs() > 1e-9 * time.abs().max(1.0) {
        return Err(Error::Usage(format!(
            "time {time} is not a nonnegative multiple of dt = {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Propagates `psi0` over `[0, t_end]`, returning states at `snapshot_times`.
pub fn propagate(
    psi0: &WaveFunction,
    system: &System,
    t_end: f64,
    cfg: &SolverConfig,
    snapshot_times: &[f64],
    limits: &MonitorLimits,
) -> Result<Propagation> {
    let prop = Propagator::new(psi0.grid(), system, cfg)?;
    let total = steps_for(t_end, cfg.dt)?;
    let mut wanted = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        let s = steps_for(t, cfg.dt)?;
        if s > total {
            return Err(Error::Usage(format!("snapshot time {t} beyond horizon {t_end}")));
        }
        wanted.push(s);
    }
    let mut order: Vec<usize> = (0..wanted.len()).collect();
    order.sort_by_key(|&i| wanted[i]);

    let grid = psi0.grid().clone();
    let h1_initial = norms(&psi0.field).h1;
    let t0 = psi0.time;
    let mut psi = psi0.clone();
    let mut out: Vec<Option<(WaveFunction, f64, f64)>> = vec![None; wanted.len()];
    let mut next = 0;
    for step in 0..=total {
        while next < order.len() && wanted[order[next]] == step {
            let mass = grid.outer_mass(&psi.field.density());
            if mass > limits.boundary_mass {
                return Err(Error::BoundaryMass {
                    mass,
                    limit: limits.boundary_mass,
                    time: psi.time,
                });
            }
            let h1 = norms(&psi.field).h1;
            if h1 > limits.blowup_factor * h1_initial {
                return Err(Error::BlowUp {
                    norm: h1,
                    initial: h1_initial,
                    factor: limits.blowup_factor,
                    time: psi.time,
                });
            }
            out[order[next]] = Some((psi.clone(), mass, h1));
            next += 1;
        }
        if step < total {
            prop.step(&mut psi);
            psi.time = t0 + (step + 1) as f64 * cfg.dt;
        }
    }
    let mut result = Propagation {
        snapshots: Vec::with_capacity(out.len()),
        boundary_mass: Vec::with_capacity(out.len()),
        h1_norms: Vec::with_capacity(out.len()),
    };
    for (psi, mass, h1) in out.into_iter().flatten() {
        result.snapshots.push(psi);
        result.boundary_mass.push(mass);
        result.h1_norms.push(h1);
    }
    Ok(result)
}

fn check_paired(a: &WaveFunction, b: &WaveFunction) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::Usage("wave functions live on different grids".into()));
    }
    if (a.time - b.time).abs() > 1e-12 * a.time.abs().max(1.0) {
        return Err(Error::Usage(format!(
            "wave functions at different times {} and {}",
            a.time, b.time
        )));
    }
    Ok(())
}

/// `||a - b||_{H1}`.
pub fn h1_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    check_paired(a, b)?;
    Ok(norms(&a.field.difference(&b.field)?).h1)
}

/// `|< (V(t/eps) - V*) psi_eps, Lap (psi_eps - psi) >|`.
pub fn gronwall_integrand(
    psi_eps: &WaveFunction,
    psi_eff: &WaveFunction,
    potential: &TimePeriodicPotential,
    vstar: &StaticPotential,
    eps: f64,
    t: f64,
) -> Result<f64> {
    check_paired(psi_eps, psi_eff)?;
    let v = potential.evaluate(t / eps, psi_eps.grid())?;
    let dv: Vec<f64> = v
        .values()
        .iter()
        .zip(vstar.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(gronwall_from_offset(&dv, &psi_eps.field, &psi_eff.field))
}

/// Integrand from a precomputed potential offset `V(t/eps) - V*`.
pub fn gronwall_from_offset(
    offset: &[f64],
    psi_eps: &ComplexField,
    psi_eff: &ComplexField,
) -> f64 {
    let grid = psi_eps.grid();
    let diff: Vec<Complex64> = psi_eps
        .values()
        .iter()
        .zip(psi_eff.values())
        .map(|(a, b)| a - b)
        .collect();
    let lap = grid.laplacian_values(&diff);
    let s: Complex64 = psi_eps
        .values()
        .iter()
        .zip(offset)
        .zip(&lap)
        .map(|((p, dv), l)| (p * dv).conj() * l)
        .sum();
    (s * grid.cell_volume()).norm()
}
