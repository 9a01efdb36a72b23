//! Bohmian densities, velocity field, quantum potential, trajectory
//! integration and hydrodynamic residuals.
//!
//! With `rho = |psi|^2` and `J = Im(conj(psi) grad psi)`, particles follow
//! `dX/dt = u(t, X)` with `u = J / rho`, and the recorded momentum is
//! `P(t) = u(t, X(t))`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::{SpatialProfile, TemporalProfile, TimePeriodicPotential};
use crate::solver::WaveFunction;

/// Node regularization floor relative to `max rho`.
pub const RELATIVE_DENSITY_FLOOR: f64 = 1e-12;

/// Densities below this fraction of `max rho` are excluded from the
/// momentum-equation residual.
pub const HYDRO_REGION_FLOOR: f64 = 1e-6;

/// Largest fraction of trajectories allowed to leave the box.
pub const MAX_ESCAPED_FRACTION: f64 = 0.05;

/// One real field per axis.
pub type VectorField = Vec<Vec<f64>>;

/// Position density, current density and Bohmian velocity on the grid.
#[derive(Clone, Debug)]
pub struct DensityFields {
    pub grid: Grid,
    pub time: f64,
    pub rho: Vec<f64>,
    pub current: VectorField,
    pub velocity: VectorField,
    /// Fraction of grid points where the velocity used the density floor.
    pub regularized_fraction: f64,
}

impl DensityFields {
    pub fn total_mass(&self) -> f64 {
        self.grid.integrate(&self.rho)
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(*v))
}

/// `rho`, `J` and `u = J / max(rho, 1e-12 max rho)`.
pub fn densities(psi: &WaveFunction) -> DensityFields {
    let grid = psi.grid().clone();
    let values = psi.field.values();
    let rho: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    let current = current_of(&grid, values);
    let floor = RELATIVE_DENSITY_FLOOR * max_of(&rho);
    let (velocity, regularized_fraction) = velocity(&rho, &current, floor);
    DensityFields {
        grid,
        time: psi.time,
        rho,
        current,
        velocity,
        regularized_fraction,
    }
}

/// `u = J / max(rho, reg_floor)` and the fraction of regularized points.
pub fn velocity(rho: &[f64], current: &[Vec<f64>], reg_floor: f64) -> (VectorField, f64) {
    let velocity = current
        .iter()
        .map(|j| {
            j.iter()
                .zip(rho)
                .map(|(j, r)| j / r.max(reg_floor))
                .collect()
        })
        .collect();
    let regularized = rho.iter().filter(|r| **r < reg_floor).count();
    let fraction = if rho.is_empty() {
        0.0
    } else {
        regularized as f64 / rho.len() as f64
    };
    (velocity, fraction)
}

/// Quantum potential `Q = 1/2 Lap(sqrt rho_r) / sqrt rho_r` with
/// `rho_r = max(rho, 1e-12 max rho)`, and the regularized fraction.
pub fn quantum_potential(grid: &Grid, rho: &[f64]) -> (Vec<f64>, f64) {
    let floor = RELATIVE_DENSITY_FLOOR * max_of(rho);
    let amp: Vec<f64> = rho.iter().map(|r| r.max(floor).sqrt()).collect();
    let lap = grid.real_laplacian(&amp);
    let q = lap.iter().zip(&amp).map(|(l, a)| 0.5 * l / a).collect();
    let fraction = rho.iter().filter(|r| **r < floor).count() as f64 / rho.len().max(1) as f64;
    (q, fraction)
}

/// `grad Q`, written as `(s grad Lap s - Lap s grad s) / (2 s^2)` with
/// `s = sqrt rho`, so no derivative ever acts on a quotient. Zero where
/// `rho` is below the node floor.
pub fn quantum_force(grid: &Grid, rho: &[f64]) -> VectorField {
    let floor = RELATIVE_DENSITY_FLOOR * max_of(rho);
    let s: Vec<f64> = rho.iter().map(|r| r.max(0.0).sqrt()).collect();
    let lap = grid.real_laplacian(&s);
    let grad_s = grid.real_gradient(&s);
    let grad_lap = grid.real_gradient(&lap);
    (0..grid.dim())
        .map(|k| {
            (0..rho.len())
                .map(|i| {
                    if rho[i] < floor {
                        0.0
                    } else {
                        (s[i] * grad_lap[k][i] - lap[i] * grad_s[k][i]) / (2.0 * rho[i])
                    }
                })
                .collect()
        })
        .collect()
}

/// Gradient of `V(t/eps, x)` or of a static potential, evaluable off-grid.
#[derive(Clone, Debug)]
pub struct ForceModel {
    spatial: SpatialProfile,
    temporal: Option<(TemporalProfile, f64)>,
    scale: f64,
}

impl ForceModel {
    /// `grad_x V(t/eps, x)`.
    pub fn oscillating(potential: &TimePeriodicPotential, eps: f64) -> Self {
        Self {
            spatial: potential.spatial.clone(),
            temporal: Some((potential.temporal.clone(), eps)),
            scale: 1.0,
        }
    }

    /// `grad V*` for `V* = mean * W`.
    pub fn effective(potential: &TimePeriodicPotential, mean: f64) -> Self {
        Self {
            spatial: potential.spatial.clone(),
            temporal: None,
            scale: mean,
        }
    }

    pub fn static_profile(spatial: SpatialProfile) -> Self {
        Self {
            spatial,
            temporal: None,
            scale: 1.0,
        }
    }

    pub fn factor(&self, t: f64) -> f64 {
        match &self.temporal {
            Some((a, eps)) => a.value(t / eps),
            None => self.scale,
        }
    }

    pub fn gradient_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.spatial.gradient_into(x, out);
        let f = self.factor(t);
        for o in out.iter_mut().take(x.len()) {
            *o *= f;
        }
    }
}

/// Draws `m` positions from the normalized grid density.
///
/// A cell is drawn by inverse CDF over all cells (row-major), which has the
/// same law as drawing axis by axis from the conditional marginals, and the
/// point is then placed uniformly inside that cell. Cells below
/// `1e-12 max rho0` carry no weight.
pub fn sample_initial_positions(
    grid: &Grid,
    rho0: &[f64],
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::Sampling("sample count must be at least 1".into()));
    }
    if rho0.len() != grid.len() {
        return Err(Error::Sampling("density does not match grid".into()));
    }
    let peak = max_of(rho0);
    let floor = RELATIVE_DENSITY_FLOOR * peak;
    let mut cdf = Vec::with_capacity(rho0.len());
    let mut acc = 0.0;
    for r in rho0 {
        if r.is_finite() && *r >= floor && *r > 0.0 {
            acc += r;
        }
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Sampling("density has no mass above the floor".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = grid.dx();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * acc;
        let cell = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
        let mut p = grid.point(cell);
        for x in p.iter_mut() {
            *x += (rng.random::<f64>() - 0.5) * dx;
        }
        out.push(p);
    }
    Ok(out)
}

fn catmull_rom(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

/// Tensor-product Catmull–Rom stencil at an off-grid position (periodic wrap).
#[derive(Clone, Debug)]
pub struct Stencil {
    entries: Vec<(usize, f64)>,
}

impl Stencil {
    pub fn new(grid: &Grid, x: &[f64]) -> Self {
        let n = grid.n_per_axis() as isize;
        let dim = grid.dim();
        let mut axes = [[(0usize, 0.0f64); 4]; 3];
        for axis in 0..dim {
            let q = (x[axis] + grid.half_width()) / grid.dx();
            let base = q.floor();
            let w = catmull_rom(q - base);
            for (o, wo) in w.iter().enumerate() {
                let i = (base as isize - 1 + o as isize).rem_euclid(n) as usize;
                axes[axis][o] = (i * grid.stride(axis), *wo);
            }
        }
        let mut entries = Vec::with_capacity(4usize.pow(dim as u32));
        match dim {
            1 => entries.extend(axes[0].iter().copied()),
            2 => {
                for a in &axes[0] {
                    for b in &axes[1] {
                        entries.push((a.0 + b.0, a.1 * b.1));
                    }
                }
            }
            _ => {
                for a in &axes[0] {
                    for b in &axes[1] {
                        for c in &axes[2] {
                            entries.push((a.0 + b.0 + c.0, a.1 * b.1 * c.1));
                        }
                    }
                }
            }
        }
        Self { entries }
    }

    #[inline]
    pub fn apply(&self, field: &[f64]) -> f64 {
        self.entries.iter().map(|(i, w)| w * field[*i]).sum()
    }
}

/// Interpolates a vector field at `x` into `out`.
pub fn interpolate_vector(grid: &Grid, field: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    let st = Stencil::new(grid, x);
    for (o, comp) in out.iter_mut().zip(field) {
        *o = st.apply(comp);
    }
}

/// Velocity fields on a uniform time mesh `t0 + i * tau`.
#[derive(Clone, Debug)]
pub struct VelocitySeries {
    grid: Grid,
    t0: f64,
    tau: f64,
    fields: Vec<VectorField>,
}

impl VelocitySeries {
    pub fn new(grid: &Grid, t0: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Usage(format!("time spacing must be positive, got {tau}")));
        }
        Ok(Self {
            grid: grid.clone(),
            t0,
            tau,
            fields: Vec::new(),
        })
    }

    pub fn push(&mut self, field: VectorField) {
        debug_assert_eq!(field.len(), self.grid.dim());
        self.fields.push(field);
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + (self.fields.len().saturating_sub(1)) as f64 * self.tau
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }

    /// Four-point Lagrange weights in time, falling back to fewer nodes on
    /// short series. Exactly the node value at mesh times.
    fn time_weights(&self, t: f64) -> Vec<(usize, f64)> {
        let len = self.fields.len();
        let u = (t - self.t0) / self.tau;
        let nearest = u.round();
        if (u - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < len {
            return vec![(nearest as usize, 1.0)];
        }
        if len < 4 {
            // Linear fallback.
            let i = (u.floor().max(0.0) as usize).min(len.saturating_sub(2));
            let f = u - i as f64;
            if len == 1 {
                return vec![(0, 1.0)];
            }
            return vec![(i, 1.0 - f), (i + 1, f)];
        }
        let i = u.floor() as isize;
        let start = (i - 1).clamp(0, len as isize - 4) as usize;
        let nodes = [0, 1, 2, 3].map(|o| (start + o) as f64);
        (0..4)
            .map(|a| {
                let mut w = 1.0;
                for b in 0..4 {
                    if a != b {
                        w *= (u - nodes[b]) / (nodes[a] - nodes[b]);
                    }
                }
                (start + a, w)
            })
            .collect()
    }

    /// `u(t, x)`, cubic in time and Catmull–Rom in space.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let st = Stencil::new(&self.grid, x);
        let tw = self.time_weights(t);
        for (axis, o) in out.iter_mut().enumerate().take(self.grid.dim()) {
            *o = tw
                .iter()
                .map(|(i, w)| w * st.apply(&self.fields[*i][axis]))
                .sum();
        }
    }
}

/// Sampled Bohmian positions and momenta.
///
/// Paths are stored sample-major: `positions[(s * times + t) * dim + axis]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub dim: usize,
    pub initial_points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    /// Samples that left the box; excluded from all statistics.
    pub flagged: Vec<usize>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.initial_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial_points.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    fn offset(&self, sample: usize, time: usize) -> usize {
        (sample * self.times.len() + time) * self.dim
    }

    pub fn position(&self, sample: usize, time: usize) -> &[f64] {
        let o = self.offset(sample, time);
        &self.positions[o..o + self.dim]
    }

    pub fn momentum(&self, sample: usize, time: usize) -> &[f64] {
        let o = self.offset(sample, time);
        &self.momenta[o..o + self.dim]
    }

    pub fn is_flagged(&self, sample: usize) -> bool {
        self.flagged.binary_search(&sample).is_ok()
    }

    /// Indices of samples that stayed inside the box.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|s| !self.is_flagged(*s))
    }
}

fn inside_box(grid: &Grid, x: &[f64]) -> bool {
    let l = grid.half_width();
    x.iter().all(|v| v.is_finite() && *v >= -l && *v < l)
}

/// RK4 along the velocity series with step `stride * tau`; records
/// `X` and `P = u(t, X)` at `record_times`, which must lie on the RK mesh.
pub fn integrate_trajectories(
    series: &VelocitySeries,
    initial_points: &[Vec<f64>],
    record_times: &[f64],
    stride: usize,
) -> Result<TrajectoryEnsemble> {
    if stride < 4 {
        return Err(Error::Usage(format!(
            "velocity mesh must be at least 4x finer than the RK step (stride {stride})"
        )));
    }
    if series.len() < 2 {
        return Err(Error::Usage("velocity series needs at least two fields".into()));
    }
    let grid = series.grid();
    let dim = grid.dim();
    if initial_points.iter().any(|p| p.len() != dim) {
        return Err(Error::Usage(format!("initial points need {dim} coordinates")));
    }
    let h = stride as f64 * series.tau();
    let mut record_steps = Vec::with_capacity(record_times.len());
    for &t in record_times {
        let u = (t - series.t0()) / h;
        let k = u.round();
        if k < 0.0 || (u - k).abs() > 1e-9 || t > series.t_end() + 1e-12 * t.abs().max(1.0) {
            return Err(Error::Usage(format!(
                "record time {t} is not on the RK mesh of step {h} within the series"
            )));
        }
        record_steps.push(k as usize);
    }
    if record_steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("record times must be nondecreasing".into()));
    }
    let last = record_steps.last().copied().unwrap_or(0);
    let nt = record_times.len();
    let t0 = series.t0();

    let paths: Vec<(Vec<f64>, Vec<f64>, bool)> = initial_points
        .par_iter()
        .map(|x0| {
            let mut pos = vec![f64::NAN; nt * dim];
            let mut mom = vec![f64::NAN; nt * dim];
            let mut x = x0.clone();
            let mut k1 = vec![0.0; dim];
            let mut k2 = vec![0.0; dim];
            let mut k3 = vec![0.0; dim];
            let mut k4 = vec![0.0; dim];
            let mut tmp = vec![0.0; dim];
            let mut rec = 0;
            for step in 0..=last {
                let t = t0 + step as f64 * h;
                if !inside_box(grid, &x) {
                    return (pos, mom, true);
                }
                while rec < nt && record_steps[rec] == step {
                    series.eval(t, &x, &mut k1);
                    pos[rec * dim..(rec + 1) * dim].copy_from_slice(&x);
                    mom[rec * dim..(rec + 1) * dim].copy_from_slice(&k1);
                    rec += 1;
                }
                if step == last {
                    break;
                }
                series.eval(t, &x, &mut k1);
                for j in 0..dim {
                    tmp[j] = x[j] + 0.5 * h * k1[j];
                }
                if !inside_box(grid, &tmp) {
                    return (pos, mom, true);
                }
                series.eval(t + 0.5 * h, &tmp, &mut k2);
                for j in 0..dim {
                    tmp[j] = x[j] + 0.5 * h * k2[j];
                }
                if !inside_box(grid, &tmp) {
                    return (pos, mom, true);
                }
                series.eval(t + 0.5 * h, &tmp, &mut k3);
                for j in 0..dim {
                    tmp[j] = x[j] + h * k3[j];
                }
                if !inside_box(grid, &tmp) {
                    return (pos, mom, true);
                }
                series.eval(t + h, &tmp, &mut k4);
                for j in 0..dim {
                    x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
            (pos, mom, false)
        })
        .collect();

    let mut positions = Vec::with_capacity(initial_points.len() * nt * dim);
    let mut momenta = Vec::with_capacity(initial_points.len() * nt * dim);
    let mut flagged = Vec::new();
    for (s, (p, m, escaped)) in paths.into_iter().enumerate() {
        positions.extend(p);
        momenta.extend(m);
        if escaped {
            flagged.push(s);
        }
    }
    if flagged.len() as f64 > MAX_ESCAPED_FRACTION * initial_points.len() as f64 {
        return Err(Error::Escaped {
            flagged: flagged.len(),
            total: initial_points.len(),
        });
    }
    Ok(TrajectoryEnsemble {
        dim,
        initial_points: initial_points.to_vec(),
        times: record_times.to_vec(),
        positions,
        momenta,
        flagged,
    })
}

/// L1 residuals of the two hydrodynamic equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HydroResidual {
    pub continuity: f64,
    pub momentum: f64,
}

/// Residuals of `d_t rho + div J = 0` and
/// `d_t J + div(J (x) J / rho) + rho grad V = 1/2 rho grad(Lap sqrt(rho) / sqrt(rho))`
/// with centered time differences over equally spaced snapshots; the largest
/// value over interior snapshots is reported. The momentum residual is
/// restricted to `rho > 1e-6 max rho`.
pub fn hydrodynamic_residual(snapshots: &[DensityFields], force: &ForceModel) -> Result<HydroResidual> {
    if snapshots.len() < 3 {
        return Err(Error::Usage(format!(
            "need at least 3 snapshots for centered differencing, got {}",
            snapshots.len()
        )));
    }
    let grid = &snapshots[0].grid;
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let spacing = snapshots[1].time - snapshots[0].time;
    if !(spacing > 0.0)
        || snapshots
            .windows(2)
            .any(|w| ((w[1].time - w[0].time) - spacing).abs() > 1e-9 * spacing)
    {
        return Err(Error::Usage("snapshots must be equally spaced in time".into()));
    }
    let mut worst = HydroResidual {
        continuity: 0.0,
        momentum: 0.0,
    };
    for c in 1..snapshots.len() - 1 {
        let (prev, mid, next) = (&snapshots[c - 1], &snapshots[c], &snapshots[c + 1]);
        let div_j = grid.real_divergence(&mid.current);
        let continuity: f64 = (0..grid.len())
            .map(|i| ((next.rho[i] - prev.rho[i]) / (2.0 * spacing) + div_j[i]).abs())
            .sum::<f64>()
            * dv;

        let rho = &mid.rho;
        let j = &mid.current;
        let grad_rho = grid.real_gradient(rho);
        let grad_j: Vec<VectorField> = j.iter().map(|jk| grid.real_gradient(jk)).collect();
        let s: Vec<f64> = rho.iter().map(|r| r.max(0.0).sqrt()).collect();
        let lap_s = grid.real_laplacian(&s);
        let grad_s = grid.real_gradient(&s);
        let grad_lap_s = grid.real_gradient(&lap_s);
        let floor = HYDRO_REGION_FLOOR * max_of(rho);
        let mut x = vec![0.0; dim];
        let mut grad_v = vec![0.0; dim];
        let mut momentum = 0.0;
        for i in 0..grid.len() {
            if rho[i] <= floor {
                continue;
            }
            grid.point_into(i, &mut x);
            force.gradient_into(mid.time, &x, &mut grad_v);
            let j_dot_grad_rho: f64 = (0..dim).map(|a| j[a][i] * grad_rho[a][i]).sum();
            let mut norm_sq = 0.0;
            for k in 0..dim {
                let dt_j = (next.current[k][i] - prev.current[k][i]) / (2.0 * spacing);
                let advect: f64 = (0..dim).map(|a| j[a][i] * grad_j[k][a][i]).sum();
                let div_flux = (div_j[i] * j[k][i] + advect) / rho[i]
                    - j[k][i] * j_dot_grad_rho / (rho[i] * rho[i]);
                let quantum = 0.5 * (s[i] * grad_lap_s[k][i] - lap_s[i] * grad_s[k][i]);
                let r = dt_j + div_flux + rho[i] * grad_v[k] - quantum;
                norm_sq += r * r;
            }
            momentum += norm_sq.sqrt();
        }
        momentum *= dv;
        worst.continuity = worst.continuity.max(continuity);
        worst.momentum = worst.momentum.max(momentum);
    }
    Ok(worst)
}

/// Ensemble mean of the time-averaged residual of
/// `dP/dt = -grad V(t, X) + grad Q(t, X)` with centered differences of the
/// recorded momenta. `quantum_forces[i]` is `grad Q` at `ensemble.times[i]`.
pub fn newton_residual(
    ensemble: &TrajectoryEnsemble,
    grid: &Grid,
    force: &ForceModel,
    quantum_forces: &[VectorField],
) -> Result<f64> {
    let nt = ensemble.times.len();
    if nt < 3 {
        return Err(Error::Usage("need at least 3 record times".into()));
    }
    if quantum_forces.len() != nt {
        return Err(Error::Usage("one quantum force field per record time is required".into()));
    }
    let spacing = ensemble.times[1] - ensemble.times[0];
    if ensemble
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.abs())
    {
        return Err(Error::Usage("momenta must be recorded on a uniform mesh".into()));
    }
    let dim = ensemble.dim;
    let active: Vec<usize> = ensemble.active().collect();
    if active.is_empty() {
        return Err(Error::Usage("no active trajectories".into()));
    }
    let per_sample: Vec<f64> = active
        .par_iter()
        .map(|&s| {
            let mut grad_v = vec![0.0; dim];
            let mut grad_q = vec![0.0; dim];
            let mut total = 0.0;
            for t in 1..nt - 1 {
                let x = ensemble.position(s, t);
                force.gradient_into(ensemble.times[t], x, &mut grad_v);
                interpolate_vector(grid, &quantum_forces[t], x, &mut grad_q);
                let (pm, pp) = (ensemble.momentum(s, t - 1), ensemble.momentum(s, t + 1));
                let norm_sq: f64 = (0..dim)
                    .map(|k| {
                        let r = (pp[k] - pm[k]) / (2.0 * spacing) + grad_v[k] - grad_q[k];
                        r * r
                    })
                    .sum();
                total += norm_sq.sqrt();
            }
            total / (nt - 2) as f64
        })
        .collect();
    Ok(per_sample.iter().sum::<f64>() / per_sample.len() as f64)
}

/// Mean of `phi` over the ensemble at record index `t`, skipping flagged samples.
pub fn ensemble_average<F: Fn(&[f64]) -> f64>(ens: &TrajectoryEnsemble, t: usize, phi: F) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for s in ens.active() {
        sum += phi(ens.position(s, t));
        n += 1;
    }
    sum / n.max(1) as f64
}

/// `J = a grad b - b grad a` for `psi = a + i b`, with the two parts
/// differentiated separately so a real wave function has exactly zero current.
pub fn current_of(grid: &Grid, values: &[Complex64]) -> VectorField {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let grad_re = grid.real_gradient(&re);
    let grad_im = grid.real_gradient(&im);
    grad_re
        .iter()
        .zip(&grad_im)
        .map(|(gr, gi)| {
            (0..values.len())
                .map(|i| re[i] * gi[i] - im[i] * gr[i])
                .collect()
        })
        .collect()
}
