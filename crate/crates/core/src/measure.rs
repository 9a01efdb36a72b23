//! Phase-space measures, a dictionary estimate of the flat distance,
//! trajectory deviation statistics and a flow-injectivity monitor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bohm::{DensityFields, TrajectoryEnsemble};
use crate::error::{Error, Result};

/// Cells below this fraction of `max rho` are dropped from a Bohmian measure.
pub const MEASURE_DROP_FLOOR: f64 = 1e-14;

/// Allowed total-mass mismatch between compared measures.
pub const MASS_MATCH_TOL: f64 = 1e-8;

/// Neighbours per sample tracked by the injectivity monitor.
pub const INJECTIVITY_NEIGHBOURS: usize = 64;

/// Stretching ratio below which injectivity is reported as lost.
pub const INJECTIVITY_THRESHOLD: f64 = 1e-3;

/// Weighted point cloud in phase space `(x, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceMeasure {
    pub dim: usize,
    /// Flat `[point][axis]`.
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

impl PhaseSpaceMeasure {
    pub fn new(dim: usize, positions: Vec<f64>, momenta: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || positions.len() != weights.len() * dim || momenta.len() != positions.len() {
            return Err(Error::Usage("phase-space arrays have inconsistent lengths".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Usage("weights must be finite and nonnegative".into()));
        }
        if positions.iter().chain(&momenta).any(|v| !v.is_finite()) {
            return Err(Error::Usage("phase-space points must be finite".into()));
        }
        let total_mass = weights.iter().sum();
        Ok(Self {
            dim,
            positions,
            momenta,
            weights,
            total_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn momentum(&self, i: usize) -> &[f64] {
        &self.momenta[i * self.dim..(i + 1) * self.dim]
    }
}

/// `rho(x) delta(p - u(x))` as one weighted point per grid cell.
///
/// Cells with `rho < 1e-14 max rho` are dropped and the remaining weights are
/// rescaled so the total mass still equals `int rho`.
pub fn bohmian_measure(d: &DensityFields) -> PhaseSpaceMeasure {
    let grid = &d.grid;
    let dim = grid.dim();
    let dv = grid.cell_volume();
    let peak = d.rho.iter().fold(0.0_f64, |m, r| m.max(*r));
    let floor = MEASURE_DROP_FLOOR * peak;
    let total: f64 = d.rho.iter().sum::<f64>() * dv;
    let mut positions = Vec::new();
    let mut momenta = Vec::new();
    let mut weights = Vec::new();
    let mut x = vec![0.0; dim];
    for (i, r) in d.rho.iter().enumerate() {
        if *r < floor || *r <= 0.0 {
            continue;
        }
        grid.point_into(i, &mut x);
        positions.extend_from_slice(&x);
        momenta.extend((0..dim).map(|k| d.velocity[k][i]));
        weights.push(r * dv);
    }
    let kept: f64 = weights.iter().sum();
    if kept > 0.0 {
        let scale = total / kept;
        for w in &mut weights {
            *w *= scale;
        }
    }
    let total_mass = weights.iter().sum();
    PhaseSpaceMeasure {
        dim,
        positions,
        momenta,
        weights,
        total_mass,
    }
}

/// `sum_i w_i phi(x_i, p_i)`.
pub fn pair_with_test_function<F>(beta: &PhaseSpaceMeasure, phi: F) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    (0..beta.len())
        .map(|i| beta.weights[i] * phi(beta.position(i), beta.momentum(i)))
        .sum()
}

/// Seeded random cosine features `c cos(w . z + b)` on `z = (x, p)`.
///
/// `w ~ N(0, I)`, `b ~ U[0, 2 pi)` and `c = 1 / max(1, |w|)`, so every feature
/// is bounded by 1 and 1-Lipschitz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestDictionary {
    pub dim: usize,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub scales: Vec<f64>,
}

impl TestDictionary {
    pub fn new(dim: usize, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::Usage("dictionary size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = 2 * dim;
        let mut frequencies = Vec::with_capacity(size * width);
        let mut phases = Vec::with_capacity(size);
        let mut scales = Vec::with_capacity(size);
        for _ in 0..size {
            let w: Vec<f64> = (0..width).map(|_| rng.sample(StandardNormal)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            frequencies.extend(w);
            phases.push(rng.random::<f64>() * std::f64::consts::TAU);
            scales.push(1.0 / norm.max(1.0));
        }
        Ok(Self {
            dim,
            frequencies,
            phases,
            scales,
        })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Value of feature `k` at `(x, p)`.
    pub fn feature(&self, k: usize, x: &[f64], p: &[f64]) -> f64 {
        let w = &self.frequencies[k * 2 * self.dim..(k + 1) * 2 * self.dim];
        let arg: f64 = (0..self.dim).map(|j| w[j] * x[j] + w[self.dim + j] * p[j]).sum();
        self.scales[k] * (arg + self.phases[k]).cos()
    }

    /// `<beta, phi_k>` for every feature.
    pub fn pairings(&self, beta: &PhaseSpaceMeasure) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|k| pair_with_test_function(beta, |x, p| self.feature(k, x, p)))
            .collect()
    }

    /// `max_k |<a, phi_k> - <b, phi_k>|`.
    pub fn distance(&self, a: &PhaseSpaceMeasure, b: &PhaseSpaceMeasure) -> Result<f64> {
        if a.dim != self.dim || b.dim != self.dim {
            return Err(Error::Usage("measure dimension does not match dictionary".into()));
        }
        if (a.total_mass - b.total_mass).abs() > MASS_MATCH_TOL {
            return Err(Error::Usage(format!(
                "total masses differ: {} vs {}",
                a.total_mass, b.total_mass
            )));
        }
        let pa = self.pairings(a);
        let pb = self.pairings(b);
        Ok(pa
            .iter()
            .zip(&pb)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
    }
}

/// Lower-bound estimate of the bounded-Lipschitz distance over a seeded
/// dictionary of `dictionary_size` cosine features.
pub fn flat_distance(
    a: &PhaseSpaceMeasure,
    b: &PhaseSpaceMeasure,
    dictionary_size: usize,
    seed: u64,
) -> Result<f64> {
    TestDictionary::new(a.dim, dictionary_size, seed)?.distance(a, b)
}

/// Flat distance between `beta` and the mono-kinetic measure of the
/// effective fields `rho(x) delta(p - u(x))`.
pub fn monokinetic_deviation(
    beta: &PhaseSpaceMeasure,
    d_eff: &DensityFields,
    dictionary_size: usize,
    seed: u64,
) -> Result<f64> {
    flat_distance(beta, &bohmian_measure(d_eff), dictionary_size, seed)
}

fn check_paired(a: &TrajectoryEnsemble, b: &TrajectoryEnsemble) -> Result<()> {
    if a.dim != b.dim || a.initial_points != b.initial_points || a.times != b.times {
        return Err(Error::Usage(
            "ensembles are not paired: initial points and times must coincide".into(),
        ));
    }
    Ok(())
}

/// Fraction of `(time, sample)` pairs with `|(X^a, P^a) - (X^b, P^b)| >= delta`.
///
/// Samples flagged in either ensemble are excluded. For `delta = 0` the
/// result is 1 if any pair differs at all and 0 otherwise.
pub fn trajectory_deviation_measure(
    ens_eps: &TrajectoryEnsemble,
    ens_eff: &TrajectoryEnsemble,
    delta: f64,
) -> Result<f64> {
    check_paired(ens_eps, ens_eff)?;
    if !(delta >= 0.0) {
        return Err(Error::Usage(format!("delta must be nonnegative, got {delta}")));
    }
    let active: Vec<usize> = ens_eps
        .active()
        .filter(|s| !ens_eff.is_flagged(*s))
        .collect();
    let nt = ens_eps.times.len();
    if active.is_empty() || nt == 0 {
        return Err(Error::Usage("no paired samples to compare".into()));
    }
    let dim = ens_eps.dim;
    let mut count = 0usize;
    let mut any = false;
    for &s in &active {
        for t in 0..nt {
            let (xa, xb) = (ens_eps.position(s, t), ens_eff.position(s, t));
            let (pa, pb) = (ens_eps.momentum(s, t), ens_eff.momentum(s, t));
            let d2: f64 = (0..dim)
                .map(|k| (xa[k] - xb[k]).powi(2) + (pa[k] - pb[k]).powi(2))
                .sum();
            let d = d2.sqrt();
            any |= d > 0.0;
            if delta > 0.0 && d >= delta {
                count += 1;
            }
        }
    }
    if delta == 0.0 {
        return Ok(if any { 1.0 } else { 0.0 });
    }
    Ok(count as f64 / (active.len() * nt) as f64)
}

/// Result of the nearest-neighbour stretching monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub min_pair_separation_ratio: f64,
    pub first_violation_time: Option<f64>,
}

/// Tracks `min |X(t, x_i) - X(t, x_j)| / |x_i - x_j|` over the 64 nearest
/// initial neighbours of every active sample.
pub fn flow_injectivity_monitor(ens: &TrajectoryEnsemble) -> Result<InjectivityReport> {
    let active: Vec<usize> = ens.active().collect();
    if active.len() < 2 {
        return Err(Error::Usage("injectivity monitor needs at least two samples".into()));
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let k = INJECTIVITY_NEIGHBOURS.min(active.len() - 1);
    let neighbours: Vec<Vec<(usize, f64)>> = active
        .par_iter()
        .map(|&i| {
            let xi = &ens.initial_points[i];
            let mut cand: Vec<(usize, f64)> = active
                .iter()
                .filter(|j| **j != i)
                .map(|&j| (j, dist(xi, &ens.initial_points[j])))
                .filter(|(_, d)| *d > 0.0)
                .collect();
            let k = k.min(cand.len());
            if k > 0 && k < cand.len() {
                cand.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            }
            cand.truncate(k);
            cand
        })
        .collect();
    let per_time: Vec<f64> = (0..ens.times.len())
        .into_par_iter()
        .map(|t| {
            let mut m = f64::INFINITY;
            for (a, &i) in active.iter().enumerate() {
                for (j, d0) in &neighbours[a] {
                    m = m.min(dist(ens.position(i, t), ens.position(*j, t)) / d0);
                }
            }
            m
        })
        .collect();
    let min_ratio = per_time.iter().fold(f64::INFINITY, |m, r| m.min(*r));
    let first = per_time
        .iter()
        .position(|r| *r < INJECTIVITY_THRESHOLD)
        .map(|t| ens.times[t]);
    Ok(InjectivityReport {
        min_pair_separation_ratio: min_ratio,
        first_violation_time: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohm::{densities, integrate_trajectories, VelocitySeries};
    use crate::grid::{ComplexField, Grid};
    use crate::solver::{initialize, InitialState, WaveFunction};
    use num_complex::Complex64;
    use proptest::{prop_assert, proptest};

    fn packet(grid: &Grid, k: f64) -> DensityFields {
        densities(
            &initialize(
                &InitialState::GaussianPacket {
                    center: vec![0.0],
                    width: 1.0,
                    momentum: vec![k],
                },
                grid,
            )
            .unwrap(),
        )
    }

    fn plane_wave(grid: &Grid, k: f64) -> DensityFields {
        let amp = (2.0 * grid.half_width()).powf(-0.5);
        let f = ComplexField::from_fn(grid, |x| Complex64::from_polar(amp, k * x[0])).unwrap();
        densities(&WaveFunction::new(f, 0.0))
    }

    #[test]
    fn plane_wave_measure_is_monokinetic() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let k = 3.0 * std::f64::consts::PI / 8.0;
        let beta = bohmian_measure(&plane_wave(&g, k));
        assert!((beta.total_mass - 1.0).abs() < 1e-12);
        assert!(beta.momenta.iter().all(|p| (p - k).abs() < 1e-12));
        assert!((pair_with_test_function(&beta, |_, _| 1.0) - 1.0).abs() < 1e-12);
        assert!((pair_with_test_function(&beta, |_, p| p[0]) - k).abs() < 1e-12);
    }

    #[test]
    fn packet_measure_moments() {
        let g = Grid::new(1, 512, 16.0).unwrap();
        let beta = bohmian_measure(&packet(&g, 2.0));
        assert!((beta.total_mass - 1.0).abs() < 1e-9);
        assert!((pair_with_test_function(&beta, |_, p| p[0]) - 2.0).abs() < 1e-8);
        let real = bohmian_measure(&packet(&g, 0.0));
        assert!(real.momenta.iter().all(|p| p.abs() < 1e-12));
        // Mass is preserved after dropping negligible cells.
        let d = packet(&g, 0.0);
        assert!((real.total_mass - g.integrate(&d.rho)).abs() < 1e-12);
        assert!(real.len() < g.len());
    }

    #[test]
    fn bohmian_kinetic_moment_of_gaussian() {
        // <u^2> vanishes for a real Gaussian; the full <p^2> = 1/4 splits into
        // the Bohmian part and the osmotic part int |grad sqrt rho|^2.
        let g = Grid::new(1, 512, 16.0).unwrap();
        let d = packet(&g, 0.0);
        let beta = bohmian_measure(&d);
        let bohm = pair_with_test_function(&beta, |_, p| p[0] * p[0]);
        let s: Vec<f64> = d.rho.iter().map(|r| r.sqrt()).collect();
        let osmotic = g.integrate(&g.real_gradient(&s)[0].iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((bohm + osmotic - 0.25).abs() < 1e-6);
    }

    fn synthetic(seed: u64, n: usize) -> PhaseSpaceMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mom: Vec<f64> = (0..n).map(|_| 0.5 * rng.random::<f64>()).collect();
        PhaseSpaceMeasure::new(1, pos, mom, vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn flat_distance_shift_bounds() {
        let a = synthetic(1, 200);
        assert_eq!(flat_distance(&a, &a, 256, 7).unwrap(), 0.0);
        for dp in [0.05, 0.2, 0.5] {
            let mut b = a.clone();
            b.momenta.iter_mut().for_each(|p| *p += dp);
            let d = flat_distance(&a, &b, 256, 7).unwrap();
            assert!(d <= dp + 1e-12 && d >= 0.1 * dp, "dp={dp} d={d}");
        }
    }

    #[test]
    fn flat_distance_rejects_mass_mismatch() {
        let a = synthetic(1, 10);
        let mut b = a.clone();
        b.weights[0] *= 2.0;
        b.total_mass = b.weights.iter().sum();
        assert!(matches!(flat_distance(&a, &b, 16, 1), Err(Error::Usage(_))));
    }

    #[test]
    fn coarsened_measure_is_close() {
        let fine = Grid::new(1, 512, 16.0).unwrap();
        let coarse = Grid::new(1, 256, 16.0).unwrap();
        let a = bohmian_measure(&packet(&fine, 1.0));
        let b = bohmian_measure(&packet(&coarse, 1.0));
        let d = flat_distance(&a, &b, 256, 3).unwrap();
        assert!(d <= 2.0 * fine.dx(), "{d}");
    }

    #[test]
    fn monokinetic_same_state_is_zero() {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let d = packet(&g, 1.0);
        assert_eq!(monokinetic_deviation(&bohmian_measure(&d), &d, 64, 5).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn flat_distance_is_a_pseudometric(sa in 0u64..1000, sb in 0u64..1000, sc in 0u64..1000) {
            let (a, b, c) = (synthetic(sa, 20), synthetic(sb, 20), synthetic(sc, 20));
            let dict = TestDictionary::new(1, 64, 11).unwrap();
            let ab = dict.distance(&a, &b).unwrap();
            let ba = dict.distance(&b, &a).unwrap();
            let ac = dict.distance(&a, &c).unwrap();
            let cb = dict.distance(&c, &b).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn deviation_is_monotone_in_delta(seed in 0u64..500, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let (a, b) = random_ensembles(seed);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let f_lo = trajectory_deviation_measure(&a, &b, lo).unwrap();
            let f_hi = trajectory_deviation_measure(&a, &b, hi).unwrap();
            prop_assert!(f_hi <= f_lo);
        }
    }

    fn random_ensembles(seed: u64) -> (TrajectoryEnsemble, TrajectoryEnsemble) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 30;
        let times = vec![0.0, 0.5, 1.0];
        let init: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random::<f64>()]).collect();
        let mk = |rng: &mut ChaCha8Rng| TrajectoryEnsemble {
            dim: 1,
            initial_points: init.clone(),
            times: times.clone(),
            positions: (0..m * 3).map(|_| rng.random::<f64>()).collect(),
            momenta: (0..m * 3).map(|_| rng.random::<f64>()).collect(),
            flagged: vec![],
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        (a, b)
    }

    #[test]
    fn deviation_edge_cases() {
        let (a, b) = random_ensembles(3);
        assert_eq!(trajectory_deviation_measure(&a, &a, 1e-6).unwrap(), 0.0);
        assert_eq!(trajectory_deviation_measure(&a, &a, 0.0).unwrap(), 0.0);
        assert_eq!(trajectory_deviation_measure(&a, &b, 0.0).unwrap(), 1.0);
        let mut c = b.clone();
        c.times[1] = 0.4;
        assert!(trajectory_deviation_measure(&a, &c, 0.1).is_err());
    }

    fn linear_ensemble(rate: f64, t_end: f64) -> TrajectoryEnsemble {
        let g = Grid::new(1, 256, 16.0).unwrap();
        let tau = 0.025;
        let steps = (t_end / tau).round() as usize;
        let mut series = VelocitySeries::new(&g, 0.0, tau).unwrap();
        let field = g.sample(|x| rate * x[0]);
        for _ in 0..=steps {
            series.push(vec![field.clone()]);
        }
        let pts: Vec<Vec<f64>> = (0..100).map(|i| vec![-2.0 + 0.04 * i as f64]).collect();
        let times: Vec<f64> = (0..=steps / 4).map(|i| i as f64 * 4.0 * tau).collect();
        integrate_trajectories(&series, &pts, &times, 4).unwrap()
    }

    #[test]
    fn translation_keeps_ratio_one() {
        let g = Grid::new(1, 64, 16.0).unwrap();
        let mut series = VelocitySeries::new(&g, 0.0, 0.1).unwrap();
        for _ in 0..=40 {
            series.push(vec![vec![0.7; g.len()]]);
        }
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![-1.0 + 0.037 * i as f64]).collect();
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.4).collect();
        let ens = integrate_trajectories(&series, &pts, &times, 4).unwrap();
        let r = flow_injectivity_monitor(&ens).unwrap();
        assert!((r.min_pair_separation_ratio - 1.0).abs() < 1e-9);
        assert!(r.first_violation_time.is_none());
    }

    #[test]
    fn focusing_flow_violates_injectivity() {
        let ens = linear_ensemble(-1.0, 8.0);
        let r = flow_injectivity_monitor(&ens).unwrap();
        let t = r.first_violation_time.expect("violation expected");
        assert!((t - 1e3_f64.ln()).abs() <= 0.11, "{t}");
        let ens = linear_ensemble(0.5, 2.0);
        let r = flow_injectivity_monitor(&ens).unwrap();
        assert!((r.min_pair_separation_ratio - 1.0).abs() < 1e-9);
    }
}
