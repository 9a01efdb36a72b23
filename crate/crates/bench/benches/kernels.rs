use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use oscbohm::bohm::{densities, integrate_trajectories, sample_initial_positions, VelocitySeries};
use oscbohm::measure::{bohmian_measure, TestDictionary};
use oscbohm::solver::{initialize, InitialState, Propagator, SolverConfig, System};
use oscbohm::{ExperimentConfig, Grid, WaveFunction};

fn packet(grid: &Grid) -> WaveFunction {
    initialize(
        &InitialState::GaussianPacket {
            center: vec![0.0],
            width: 1.0,
            momentum: vec![1.0],
        },
        grid,
    )
    .unwrap()
}

fn step(c: &mut Criterion) {
    let cfg = ExperimentConfig::harmonic_benchmark();
    let grid = cfg.build_grid().unwrap();
    let prop = Propagator::new(
        &grid,
        &System::Oscillating {
            potential: cfg.build_potential(),
            eps: 0.05,
        },
        &SolverConfig::new(0.05 / 32.0, 32).unwrap(),
    )
    .unwrap();
    let mut psi = packet(&grid);
    c.bench_function("strang_step_1d_512", |b| b.iter(|| prop.step(black_box(&mut psi))));
}

fn density_fields(c: &mut Criterion) {
    let grid = Grid::new(1, 512, 16.0).unwrap();
    let psi = packet(&grid);
    c.bench_function("densities_1d_512", |b| b.iter(|| densities(black_box(&psi))));
}

fn flat_distance(c: &mut Criterion) {
    let grid = Grid::new(1, 512, 16.0).unwrap();
    let a = bohmian_measure(&densities(&packet(&grid)));
    let mut b = a.clone();
    b.momenta.iter_mut().for_each(|p| *p += 0.1);
    let dict = TestDictionary::new(1, 256, 7).unwrap();
    c.bench_function("flat_distance_256_features", |bench| {
        bench.iter(|| dict.distance(black_box(&a), black_box(&b)).unwrap())
    });
}

fn trajectories(c: &mut Criterion) {
    let grid = Grid::new(1, 512, 16.0).unwrap();
    let psi = packet(&grid);
    let d = densities(&psi);
    let dt = 1.0 / 256.0;
    let mut series = VelocitySeries::new(&grid, 0.0, dt).unwrap();
    for _ in 0..=256 {
        series.push(d.velocity.clone());
    }
    let pts = sample_initial_positions(&grid, &d.rho, 2000, 1).unwrap();
    let times: Vec<f64> = (0..=16).map(|j| j as f64 / 16.0).collect();
    c.bench_function("rk4_2000_trajectories", |b| {
        b.iter(|| integrate_trajectories(black_box(&series), &pts, &times, 4).unwrap())
    });
}

criterion_group!(benches, step, density_fields, flat_distance, trajectories);
criterion_main!(benches);
