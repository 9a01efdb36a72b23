//! Named invariant suites at pinned desk-scale configurations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bohm::{
    densities, hydrodynamic_residual, integrate_trajectories, quantum_potential,
    sample_initial_positions, DensityFields, ForceModel, VelocitySeries,
};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::harness::config::{ExperimentConfig, TemporalSpec};
use crate::harness::run::{run_single, Schedule};
use crate::measure::{
    bohmian_measure, flat_distance, PhaseSpaceMeasure,
};
use crate::potential::{SpatialProfile, StaticPotential};
use crate::solver::{initialize, InitialState, Propagator, SolverConfig, System, WaveFunction};

pub const SUITES: [&str; 8] = [
    "unitarity",
    "splitting_order",
    "free_gaussian",
    "continuity",
    "quantum_potential",
    "degenerate_potential",
    "measure_metrics",
    "full",
];

/// One measured value against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(suite: &str, name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    fn within(suite: &str, name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            suite: suite.into(),
            name: format!("{name} in [{lo}, {hi}]"),
            value,
            tolerance: hi,
            passed: value >= lo && value <= hi,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}/{}: value {:.6e} (tolerance {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.value,
            self.tolerance
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

pub fn verify(suite: &str) -> Result<VerifyReport> {
    let checks = match suite {
        "unitarity" => unitarity()?,
        "splitting_order" => splitting_order()?,
        "free_gaussian" => free_gaussian()?,
        "continuity" => continuity()?,
        "quantum_potential" => quantum_potential_suite()?,
        "degenerate_potential" => degenerate_potential()?,
        "measure_metrics" => measure_metrics()?,
        "full" => {
            let mut all = Vec::new();
            for s in &SUITES[..SUITES.len() - 1] {
                all.extend(verify(s)?.checks);
            }
            all
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown suite '{other}'; expected one of {}",
                SUITES.join(", ")
            )))
        }
    };
    Ok(VerifyReport { checks })
}

fn benchmark_grid() -> Result<Grid> {
    Grid::new(1, 512, 16.0)
}

fn unit_packet(grid: &Grid) -> Result<WaveFunction> {
    initialize(
        &InitialState::GaussianPacket {
            center: vec![0.0; grid.dim()],
            width: 1.0,
            momentum: vec![0.0; grid.dim()],
        },
        grid,
    )
}

fn l2(field: &ComplexField) -> f64 {
    field.inner(field).re.sqrt()
}

/// Largest `| ||psi_n|| - ||psi_0|| |` over the harmonic benchmark at `eps = 0.05`.
pub fn unitarity() -> Result<Vec<Check>> {
    let mut cfg = ExperimentConfig::harmonic_benchmark();
    cfg.eps_list = vec![0.05];
    let grid = cfg.build_grid()?;
    let sched = Schedule::for_eps(&cfg, 0.05)?;
    let prop = Propagator::new(
        &grid,
        &System::Oscillating {
            potential: cfg.build_potential(),
            eps: 0.05,
        },
        &SolverConfig::new(sched.dt, cfg.solver.steps_per_fast_period)?,
    )?;
    let mut psi = unit_packet(&grid)?;
    let n0 = l2(&psi.field);
    let mut drift = 0.0_f64;
    for _ in 0..sched.total_steps() {
        prop.step(&mut psi);
        drift = drift.max((l2(&psi.field) - n0).abs());
    }
    Ok(vec![Check::at_most("unitarity", "max L2 norm drift", drift, 1e-9)])
}

/// `||psi_dt - psi_{dt/4}||` for four step sizes on the oscillating harmonic
/// system over one fast period; consecutive error ratios should be 4.
pub fn splitting_errors() -> Result<Vec<(f64, f64)>> {
    let grid = benchmark_grid()?;
    let eps = 0.2;
    let potential = ExperimentConfig::harmonic_benchmark().build_potential();
    let psi0 = unit_packet(&grid)?;
    let run = |dt: f64| -> Result<WaveFunction> {
        let prop = Propagator::new(
            &grid,
            &System::Oscillating {
                potential: potential.clone(),
                eps,
            },
            &SolverConfig::new(dt, 32)?,
        )?;
        let steps = (eps / dt).round() as usize;
        let mut psi = psi0.clone();
        for _ in 0..steps {
            prop.step(&mut psi);
        }
        Ok(psi)
    };
    let dt0 = eps / 32.0;
    (0..4)
        .map(|h| {
            let dt = dt0 / 2f64.powi(h);
            let coarse = run(dt)?;
            let fine = run(dt / 4.0)?;
            Ok((dt, l2(&coarse.field.difference(&fine.field)?)))
        })
        .collect()
}

pub fn splitting_order() -> Result<Vec<Check>> {
    let errors = splitting_errors()?;
    Ok(errors
        .windows(2)
        .map(|w| {
            Check::within(
                "splitting_order",
                &format!("error ratio dt={:.3e} -> dt/2", w[0].0),
                w[0].1 / w[1].1,
                4.0 / 1.5,
                4.0 * 1.5,
            )
        })
        .collect())
}

/// Free unit Gaussian to `t = 2`: trajectory scaling and variance.
pub struct FreeGaussianOutcome {
    pub max_trajectory_error: f64,
    pub variance: f64,
    pub samples_checked: usize,
}

pub fn free_gaussian_outcome() -> Result<FreeGaussianOutcome> {
    let grid = benchmark_grid()?;
    let vstar = StaticPotential::constant(&grid, 0.0);
    let dt: f64 = 2e-3;
    let t_end = 2.0;
    let steps = (t_end / dt).round() as usize;
    let prop = Propagator::new(
        &grid,
        &System::Effective { vstar },
        &SolverConfig::new(dt, 32)?,
    )?;
    let mut psi = unit_packet(&grid)?;
    let rho0 = psi.field.density();
    let mut series = VelocitySeries::new(&grid, 0.0, dt)?;
    for step in 0..=steps {
        series.push(densities(&psi).velocity);
        if step < steps {
            prop.step(&mut psi);
            psi.time = (step + 1) as f64 * dt;
        }
    }
    let rho = psi.field.density();
    let variance: f64 = grid
        .axis_coords()
        .iter()
        .zip(&rho)
        .map(|(x, r)| x * x * r)
        .sum::<f64>()
        * grid.dx();
    let points = sample_initial_positions(&grid, &rho0, 2000, 17)?;
    let ens = integrate_trajectories(&series, &points, &[0.0, t_end], 4)?;
    let mut max_err = 0.0_f64;
    let mut checked = 0;
    for s in ens.active() {
        let x0 = ens.initial_points[s][0];
        if x0.abs() <= 3.0 {
            max_err = max_err.max((ens.position(s, 1)[0] - std::f64::consts::SQRT_2 * x0).abs());
            checked += 1;
        }
    }
    Ok(FreeGaussianOutcome {
        max_trajectory_error: max_err,
        variance,
        samples_checked: checked,
    })
}

pub fn free_gaussian() -> Result<Vec<Check>> {
    let o = free_gaussian_outcome()?;
    Ok(vec![
        Check::at_most(
            "free_gaussian",
            "max |X(2) - sqrt(2) x0| over |x0| <= 3",
            o.max_trajectory_error,
            1e-3,
        ),
        Check::at_most("free_gaussian", "|variance(2) - 2|", (o.variance - 2.0).abs(), 1e-4),
    ])
}

/// Continuity residual of a free packet at `t = 0.5` with snapshot spacing `dt`.
pub fn continuity_residual(dt: f64) -> Result<f64> {
    let grid = benchmark_grid()?;
    let vstar = StaticPotential::constant(&grid, 0.0);
    let prop = Propagator::new(&grid, &System::Effective { vstar }, &SolverConfig::new(dt, 32)?)?;
    let mut psi = initialize(
        &InitialState::GaussianPacket {
            center: vec![0.0],
            width: 1.0,
            momentum: vec![1.0],
        },
        &grid,
    )?;
    let centre = (0.5 / dt).round() as usize;
    let mut snaps: Vec<DensityFields> = Vec::with_capacity(3);
    for step in 0..=centre + 1 {
        psi.time = step as f64 * dt;
        if step + 1 >= centre {
            snaps.push(densities(&psi));
        }
        prop.step(&mut psi);
    }
    Ok(hydrodynamic_residual(&snaps, &ForceModel::static_profile(SpatialProfile::Zero))?.continuity)
}

pub fn continuity() -> Result<Vec<Check>> {
    let coarse = continuity_residual(1e-3)?;
    let fine = continuity_residual(5e-4)?;
    Ok(vec![
        Check::at_most("continuity", "L1 residual at dt = 1e-3", coarse, 1e-6),
        Check::within("continuity", "residual ratio under dt halving", coarse / fine, 3.5, 4.5),
    ])
}

pub fn quantum_potential_suite() -> Result<Vec<Check>> {
    let grid = benchmark_grid()?;
    let rho = grid.sample(|x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
    let (q, _) = quantum_potential(&grid, &rho);
    let zero = grid.axis_coords().iter().position(|x| *x == 0.0).unwrap_or(0);
    let mut worst = 0.0_f64;
    for (x, q) in grid.axis_coords().iter().zip(&q) {
        if x.abs() <= 4.0 {
            worst = worst.max((q - (x * x / 8.0 - 0.25)).abs());
        }
    }
    Ok(vec![
        Check::at_most("quantum_potential", "|Q(0) + 1/4|", (q[zero] + 0.25).abs(), 1e-6),
        Check::at_most("quantum_potential", "max |Q - (x^2/8 - 1/4)| on |x| <= 4", worst, 1e-6),
    ])
}

/// Time-independent potential through the full harness at two `eps`.
pub fn degenerate_potential() -> Result<Vec<Check>> {
    let mut cfg = ExperimentConfig::harmonic_benchmark();
    cfg.potential.temporal = TemporalSpec::Constant { value: 1.0 };
    cfg.ensemble_size = 500;
    cfg.delta_list = vec![1e-4, 0.05];
    let mut checks = Vec::new();
    for eps in [0.2, 0.025] {
        let row = run_single(&cfg, eps)?;
        if !row.valid {
            return Err(Error::Validity(format!(
                "degenerate run at eps = {eps} invalid: {}",
                row.reason.unwrap_or_default()
            )));
        }
        checks.push(Check::at_most(
            "degenerate_potential",
            &format!("H1 distance at eps = {eps}"),
            row.h1_wave.unwrap_or(f64::INFINITY),
            5e-9,
        ));
        let dev = row.traj_dev.iter().fold(0.0_f64, |m, d| m.max(d.value));
        checks.push(Check::at_most(
            "degenerate_potential",
            &format!("trajectory deviation at eps = {eps}"),
            dev,
            0.0,
        ));
    }
    Ok(checks)
}

pub fn measure_metrics() -> Result<Vec<Check>> {
    let grid = benchmark_grid()?;
    let psi = initialize(
        &InitialState::GaussianPacket {
            center: vec![0.0],
            width: 1.0,
            momentum: vec![2.0],
        },
        &grid,
    )?;
    let d = densities(&psi);
    let beta = bohmian_measure(&d);
    let mean_p = crate::measure::pair_with_test_function(&beta, |_, p| p[0]);
    let mut checks = vec![
        Check::at_most(
            "measure_metrics",
            "|mass(beta) - int rho|",
            (beta.total_mass - grid.integrate(&d.rho)).abs(),
            1e-9,
        ),
        Check::at_most("measure_metrics", "|<beta, p> - 2|", (mean_p - 2.0).abs(), 1e-8),
        Check::at_most(
            "measure_metrics",
            "flat distance to itself",
            flat_distance(&beta, &beta, 256, 1)?,
            0.0,
        ),
    ];
    for dp in [0.1, 0.5] {
        let shifted = PhaseSpaceMeasure {
            momenta: beta.momenta.iter().map(|p| p + dp).collect(),
            ..beta.clone()
        };
        let dist = flat_distance(&beta, &shifted, 256, 1)?;
        checks.push(Check::within(
            "measure_metrics",
            &format!("flat distance under momentum shift {dp}"),
            dist,
            0.1 * dp,
            dp,
        ));
    }
    // Deviation monotone in delta on a small oscillating run.
    let mut cfg = ExperimentConfig::harmonic_benchmark();
    cfg.horizon = 0.5;
    cfg.snapshot_count = 16;
    cfg.ensemble_size = 300;
    cfg.delta_list = vec![0.01, 0.02, 0.05, 0.1];
    let row = run_single(&cfg, 0.2)?;
    let devs: Vec<f64> = row.traj_dev.iter().map(|d| d.value).collect();
    let violations = devs.windows(2).filter(|w| w[1] > w[0]).count();
    checks.push(Check::at_most(
        "measure_metrics",
        "deviation increases with delta (count)",
        violations as f64,
        0.0,
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norms;
    use crate::measure::trajectory_deviation_measure;

        fn paired_deviation_identical(delta: f64) -> Result<f64> {
        let grid = benchmark_grid()?;
        let psi = unit_packet(&grid)?;
        let mut series = VelocitySeries::new(&grid, 0.0, 0.01)?;
        for _ in 0..=8 {
            series.push(densities(&psi).velocity);
        }
        let pts = sample_initial_positions(&grid, &psi.field.density(), 100, 3)?;
        let ens = integrate_trajectories(&series, &pts, &[0.0, 0.04, 0.08], 4)?;
        trajectory_deviation_measure(&ens, &ens, delta)
    }

    #[test]
    fn unknown_suite_is_usage_error() {
        assert!(matches!(verify("nope"), Err(Error::Usage(_))));
    }

    #[test]
    fn quantum_potential_suite_passes() {
        let r = verify("quantum_potential").unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn identical_ensembles_do_not_deviate() {
        assert_eq!(paired_deviation_identical(1e-6).unwrap(), 0.0);
    }

    #[test]
    fn unit_packet_is_normalized() {
        let g = benchmark_grid().unwrap();
        let p = unit_packet(&g).unwrap();
        assert!((norms(&p.field).l2 - 1.0).abs() < 1e-12);
    }
}
