//! Single-eps runs and eps-sweeps.
//!
//! Both systems start from the same initial state (up to the optional
//! perturbation) and are stepped in lockstep with a common `dt`. Wave-level
//! metrics are taken on a uniform snapshot mesh and reported as their
//! largest value over `[0, T]`; the Gronwall integrand is averaged over
//! every step.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::bohm::{densities, integrate_trajectories, sample_initial_positions, VelocitySeries};
use crate::error::{Error, Result};
use crate::grid::norms;
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{write_field, write_report, ConvergenceReport, DeltaValue, ReportRow};
use crate::measure::{
    bohmian_measure, flow_injectivity_monitor, trajectory_deviation_measure, TestDictionary,
};
use crate::solver::{gronwall_from_offset, Propagator, SolverConfig, System};

/// Stream tags for [`derive_seed`].
pub const SAMPLING_STREAM: u64 = 1;
pub const DICTIONARY_STREAM: u64 = 2;

/// SplitMix64 mix of the master seed and a stream tag.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Time mesh of one run: `snapshot_count * steps_per_snapshot` steps of `dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub steps_per_snapshot: usize,
    pub snapshot_count: usize,
}

impl Schedule {
    /// Largest `dt = T / (S k)` with `k` a multiple of the trajectory stride
    /// and `dt <= eps / steps_per_fast_period`.
    pub fn for_eps(config: &ExperimentConfig, eps: f64) -> Result<Self> {
        let s = config.snapshot_count;
        let stride = config.solver.trajectory_stride;
        let dt_max = eps / config.solver.steps_per_fast_period as f64;
        let k_min = (config.horizon / (s as f64 * dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let k = k_min.div_ceil(stride) * stride;
        Ok(Self {
            dt: config.horizon / (s * k) as f64,
            steps_per_snapshot: k,
            snapshot_count: s,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_snapshot * self.snapshot_count
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        (0..=self.snapshot_count)
            .map(|j| (j * self.steps_per_snapshot) as f64 * self.dt)
            .collect()
    }
}

fn is_monitor_abort(e: &Error) -> bool {
    matches!(
        e,
        Error::BoundaryMass { .. } | Error::BlowUp { .. } | Error::Escaped { .. }
    )
}

/// One report row. Monitor aborts give an invalid row with the reason;
/// configuration problems are returned as errors.
pub fn run_single(config: &ExperimentConfig, eps: f64) -> Result<ReportRow> {
    run_single_with_fields(config, eps, None)
}

/// As [`run_single`], optionally writing binary field snapshots under `fields_dir`.
pub fn run_single_with_fields(
    config: &ExperimentConfig,
    eps: f64,
    fields_dir: Option<&Path>,
) -> Result<ReportRow> {
    config.validate()?;
    let sched = Schedule::for_eps(config, eps)?;
    let start = Instant::now();
    match compute_row(config, eps, &sched, fields_dir) {
        Ok(mut row) => {
            row.wall_time = start.elapsed().as_secs_f64();
            Ok(row)
        }
        Err(e) if is_monitor_abort(&e) => Ok(ReportRow::invalid(
            eps,
            sched.dt,
            sched.total_steps(),
            e.to_string(),
            start.elapsed().as_secs_f64(),
        )),
        Err(e) => Err(e),
    }
}

fn compute_row(
    config: &ExperimentConfig,
    eps: f64,
    sched: &Schedule,
    fields_dir: Option<&Path>,
) -> Result<ReportRow> {
    let grid = config.build_grid()?;
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let potential = config.build_potential();
    let vstar = potential.effective_potential(&grid, config.potential.quad_order)?;
    let w = potential.spatial_values(&grid)?;
    let solver_cfg = SolverConfig::new(sched.dt, config.solver.steps_per_fast_period)?;
    let prop_eps = Propagator::new(
        &grid,
        &System::Oscillating {
            potential: potential.clone(),
            eps,
        },
        &solver_cfg,
    )?;
    let prop_eff = Propagator::new(
        &grid,
        &System::Effective {
            vstar: vstar.clone(),
        },
        &solver_cfg,
    )?;
    let (mut psi_eps, mut psi_eff) = config.initial_states(&grid, eps)?;
    let h1_init_eps = norms(&psi_eps.field).h1;
    let h1_init_eff = norms(&psi_eff.field).h1;
    let dictionary = TestDictionary::new(
        dim,
        config.dictionary_size,
        derive_seed(config.seed, DICTIONARY_STREAM),
    )?;
    let fields_dir = match (config.write_fields, fields_dir) {
        (true, Some(d)) => {
            let d = d.join(format!("eps_{eps}"));
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            Some(d)
        }
        _ => None,
    };

    let dt = sched.dt;
    let total = sched.total_steps();
    let k = sched.steps_per_snapshot;
    let limit = config.solver.boundary_mass_limit;
    let blowup = config.solver.blowup_factor;

    let mut series_eps = VelocitySeries::new(&grid, 0.0, dt)?;
    let mut series_eff = VelocitySeries::new(&grid, 0.0, dt)?;
    let mut rho0 = Vec::new();
    let mut b_integral = 0.0;
    let mut sup = [0.0_f64; 4];
    let mut h1_final = 0.0;
    let mut boundary = 0.0_f64;
    let mut offset = vec![0.0; grid.len()];

    for step in 0..=total {
        let t = step as f64 * dt;
        psi_eps.time = t;
        psi_eff.time = t;
        let d_eps = densities(&psi_eps);
        let d_eff = densities(&psi_eff);

        let a = potential.temporal.value(t / eps);
        for ((o, wi), vi) in offset.iter_mut().zip(&w).zip(vstar.values()) {
            *o = a * wi - vi;
        }
        let b = gronwall_from_offset(&offset, &psi_eps.field, &psi_eff.field);
        let weight = if step == 0 || step == total { 0.5 } else { 1.0 };
        b_integral += weight * b * dt;

        if step % k == 0 {
            for d in [&d_eps, &d_eff] {
                let mass = grid.outer_mass(&d.rho);
                boundary = boundary.max(mass);
                if mass > limit {
                    return Err(Error::BoundaryMass { mass, limit, time: t });
                }
            }
            for (psi, h1_init) in [(&psi_eps, h1_init_eps), (&psi_eff, h1_init_eff)] {
                let h1 = norms(&psi.field).h1;
                if h1 > blowup * h1_init {
                    return Err(Error::BlowUp {
                        norm: h1,
                        initial: h1_init,
                        factor: blowup,
                        time: t,
                    });
                }
            }
            let h1 = norms(&psi_eps.field.difference(&psi_eff.field)?).h1;
            let l1_rho: f64 = d_eps
                .rho
                .iter()
                .zip(&d_eff.rho)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * dv;
            let l1_current: f64 = (0..grid.len())
                .map(|i| {
                    (0..dim)
                        .map(|c| (d_eps.current[c][i] - d_eff.current[c][i]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                * dv;
            let mono = dictionary.distance(&bohmian_measure(&d_eps), &bohmian_measure(&d_eff))?;
            for (s, v) in sup.iter_mut().zip([h1, l1_rho, l1_current, mono]) {
                *s = s.max(v);
            }
            h1_final = h1;
            if let Some(dir) = &fields_dir {
                let j = step / k;
                write_field(&psi_eps, &dir.join(format!("eps_{j:04}.bin")))?;
                write_field(&psi_eff, &dir.join(format!("eff_{j:04}.bin")))?;
            }
        }
        if step == 0 {
            rho0 = d_eff.rho.clone();
        }
        series_eps.push(d_eps.velocity);
        series_eff.push(d_eff.velocity);
        if step < total {
            prop_eps.step(&mut psi_eps);
            prop_eff.step(&mut psi_eff);
        }
    }

    let points = sample_initial_positions(
        &grid,
        &rho0,
        config.ensemble_size,
        derive_seed(config.seed, SAMPLING_STREAM),
    )?;
    let times = sched.snapshot_times();
    let stride = config.solver.trajectory_stride;
    let ens_eps = integrate_trajectories(&series_eps, &points, &times, stride)?;
    let ens_eff = integrate_trajectories(&series_eff, &points, &times, stride)?;
    let traj_dev = config
        .delta_list
        .iter()
        .map(|&delta| {
            Ok(DeltaValue {
                delta,
                value: trajectory_deviation_measure(&ens_eps, &ens_eff, delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inj_eps = flow_injectivity_monitor(&ens_eps)?;
    let inj_eff = flow_injectivity_monitor(&ens_eff)?;
    let violation = match (inj_eps.first_violation_time, inj_eff.first_violation_time) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let escaped = ens_eps.flagged.len().max(ens_eff.flagged.len()) as f64 / points.len() as f64;

    Ok(ReportRow {
        eps,
        dt,
        steps: total,
        h1_wave: Some(sup[0]),
        l1_rho: Some(sup[1]),
        l1_current: Some(sup[2]),
        b_eps_avg: Some(b_integral / config.horizon),
        monokinetic_dev: Some(sup[3]),
        traj_dev,
        boundary_mass: Some(boundary),
        injectivity_ratio: Some(
            inj_eps
                .min_pair_separation_ratio
                .min(inj_eff.min_pair_separation_ratio),
        ),
        injectivity_violation_time: violation,
        escaped_fraction: Some(escaped),
        h1_final: Some(h1_final),
        wall_time: 0.0,
        valid: true,
        reason: None,
    })
}

/// Runs every `eps` concurrently and assembles the report.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    sweep_impl(config, None)
}

fn sweep_impl(config: &ExperimentConfig, fields_dir: Option<&Path>) -> Result<ConvergenceReport> {
    config.validate()?;
    let rows = config
        .eps_list
        .par_iter()
        .map(|&eps| run_single_with_fields(config, eps, fields_dir))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::assemble(config, rows)
}

/// Sweep writing `report.csv`, `report.json` and, if enabled, field snapshots.
pub fn run_sweep_to(config: &ExperimentConfig, out_dir: &Path) -> Result<ConvergenceReport> {
    let fields = out_dir.join("fields");
    let report = sweep_impl(config, Some(&fields))?;
    write_report(&report, out_dir)?;
    Ok(report)
}

/// One `eps`, written like a one-row sweep. `eps` defaults to the first entry.
pub fn run_one_to(
    config: &ExperimentConfig,
    eps: Option<f64>,
    out_dir: &Path,
) -> Result<ConvergenceReport> {
    let mut cfg = config.clone();
    if let Some(e) = eps {
        cfg.eps_list = vec![e];
    } else {
        cfg.eps_list.truncate(1);
    }
    run_sweep_to(&cfg, out_dir)
}

/// Output directory from the CLI flag or the config.
pub fn resolve_out_dir(config: &ExperimentConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Usage("no output directory: pass --out or set output_dir".into()))
}
