//! Property tests of the module invariants through the public API.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use oscbohm::bohm::densities;
use oscbohm::grid::{norms, spectral_gradient, spectral_l2, spectral_laplacian};
use oscbohm::measure::bohmian_measure;
use oscbohm::{
    ComplexField, ExperimentConfig, Grid, Propagator, SolverConfig, SpatialProfile, System,
    TemporalProfile, TimePeriodicPotential, WaveFunction,
};

fn grid() -> Grid {
    Grid::new(1, 512, 20.0).unwrap()
}

/// Smooth packet superposition described by (center, width, momentum, weight).
fn smooth(grid: &Grid, parts: &[(f64, f64, f64, f64)]) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        parts
            .iter()
            .map(|&(c, w, k, a)| {
                let d = x[0] - c;
                Complex64::from_polar(a * (-d * d / (2.0 * w * w)).exp(), k * x[0])
            })
            .sum()
    })
    .unwrap()
}

fn parts() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-3.0..3.0f64, 0.6..1.5f64, -2.0..2.0f64, 0.2..1.0f64), 1..4)
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn harmonic_oscillating(stiffness: f64) -> TimePeriodicPotential {
    TimePeriodicPotential::new(TemporalProfile::Cosine { amplitude: 1.0 }, SpatialProfile::Harmonic { stiffness })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parseval(p in parts()) {
        let f = smooth(&grid(), &p);
        let physical = norms(&f).l2;
        prop_assert!((physical - spectral_l2(&f)).abs() <= 1e-12 * physical);
    }

    #[test]
    fn derivatives_are_linear(p in parts(), q in parts(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let g = grid();
        let (f, h) = (smooth(&g, &p), smooth(&g, &q));
        let (ca, cb) = (Complex64::new(a, 0.0), Complex64::new(0.0, b));
        let mixed = f.combine(ca, &h, cb);
        let lhs = spectral_laplacian(&mixed);
        let rhs = spectral_laplacian(&f).combine(ca, &spectral_laplacian(&h), cb);
        let diff = lhs.difference(&rhs).unwrap();
        prop_assert!(max_abs(diff.values()) <= 1e-12 * max_abs(lhs.values()).max(1.0));
        let lg = &spectral_gradient(&mixed)[0];
        let rg = spectral_gradient(&f)[0].combine(ca, &spectral_gradient(&h)[0], cb);
        prop_assert!(max_abs(lg.difference(&rg).unwrap().values()) <= 1e-12 * max_abs(lg.values()).max(1.0));
    }

    #[test]
    fn laplacian_is_divergence_of_gradient(p in parts()) {
        let g = grid();
        let f: Vec<f64> = smooth(&g, &p).values().iter().map(|z| z.re).collect();
        let lap = g.real_laplacian(&f);
        let div = g.real_divergence(&g.real_gradient(&f));
        let scale = lap.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = lap.iter().zip(&div).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err <= 1e-10 * scale);
    }

    #[test]
    fn mean_zero_oscillation(stiffness in 0.1..3.0f64) {
        let g = grid();
        let v = harmonic_oscillating(stiffness);
        let vstar = v.effective_potential(&g, 64).unwrap();
        let at_unit = v.evaluate(0.25, &g).unwrap();
        for (a, b) in vstar.values().iter().zip(at_unit.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn effective_potential_is_linear_in_w(k in 0.1..3.0f64, depth in 0.1..2.0f64, width in 0.5..2.0f64) {
        let g = grid();
        let temporal = TemporalProfile::ExpSine { amplitude: 0.7 };
        let w1 = SpatialProfile::Harmonic { stiffness: k };
        let w2 = SpatialProfile::GaussianWell { depth, width };
        let (a, b) = (w1.clone(), w2.clone());
        let sum = SpatialProfile::Custom(Arc::new(move |x: &[f64]| a.value(x) + b.value(x)));
        let eff = |w: SpatialProfile| {
            TimePeriodicPotential::new(temporal.clone(), w).effective_potential(&g, 64).unwrap()
        };
        let (e1, e2, e12) = (eff(w1), eff(w2), eff(sum));
        for i in 0..g.len() {
            let lhs = e12.values()[i];
            prop_assert!((lhs - e1.values()[i] - e2.values()[i]).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn period_shift_leaves_mean_unchanged(c in -1.0..1.0f64, amp in 0.1..1.5f64) {
        let base = TemporalProfile::ExpSine { amplitude: amp };
        let shifted = TemporalProfile::Custom(Arc::new(move |s: f64| {
            (amp * (2.0 * std::f64::consts::PI * (s + c)).sin()).exp()
        }));
        let spatial = SpatialProfile::Harmonic { stiffness: 1.0 };
        let m0 = TimePeriodicPotential::new(base, spatial.clone()).temporal_mean(64).unwrap();
        let m1 = TimePeriodicPotential::new(shifted, spatial).temporal_mean(64).unwrap();
        prop_assert!((m0 - m1).abs() <= 1e-12 * m0);
    }

    #[test]
    fn steps_are_unitary_and_reversible(p in parts(), eps in 0.05..0.5f64, t0 in 0.0..1.0f64) {
        let g = grid();
        let psi0 = WaveFunction::new(smooth(&g, &p).normalized().unwrap(), t0);
        let dt = eps / 32.0;
        let system = System::Oscillating { potential: harmonic_oscillating(1.0), eps };
        let prop = Propagator::new(&g, &system, &SolverConfig::new(dt, 32).unwrap()).unwrap();
        let mut psi = psi0.clone();
        let n0 = norms(&psi.field).l2;
        for _ in 0..8 {
            prop.step(&mut psi);
            prop_assert!((norms(&psi.field).l2 - n0).abs() <= 1e-12);
        }
        let back = prop.reversed();
        for _ in 0..8 {
            back.step(&mut psi);
        }
        prop_assert!((psi.time - t0).abs() <= 1e-12);
        prop_assert!(norms(&psi.field.difference(&psi0.field).unwrap()).l2 <= 1e-11);
    }

    #[test]
    fn density_fields_are_consistent(p in parts()) {
        let g = grid();
        let psi = WaveFunction::new(smooth(&g, &p).normalized().unwrap(), 0.0);
        let d = densities(&psi);
        prop_assert!(d.rho.iter().all(|r| *r >= 0.0));
        prop_assert!((g.integrate(&d.rho) - 1.0).abs() <= 1e-9);
        let floor = 1e-12 * d.rho.iter().fold(0.0_f64, |m, r| m.max(*r));
        for i in 0..g.len() {
            if d.rho[i] > floor {
                let j = d.current[0][i];
                prop_assert!((d.velocity[0][i] * d.rho[i] - j).abs() <= 1e-10 * j.abs().max(1e-300) + 1e-300);
            }
        }
        let beta = bohmian_measure(&d);
        let mass: f64 = beta.weights.iter().sum();
        prop_assert!((mass - g.integrate(&d.rho)).abs() <= 1e-9);
        prop_assert!((mass - beta.total_mass).abs() <= 1e-10);
    }

    #[test]
    fn config_validation_tracks_eps_ordering(eps in prop::collection::vec(0.001..1.2f64, 1..6)) {
        let mut cfg = ExperimentConfig::harmonic_benchmark();
        cfg.eps_list = eps.clone();
        let ordered = eps.windows(2).all(|w| w[1] < w[0]) && eps.iter().all(|e| *e <= 1.0);
        prop_assert_eq!(cfg.validate().is_ok(), ordered);
    }
}
