//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use oscbohm::harness::config::TemporalSpec;
use oscbohm::harness::verify::{
    continuity_residual, free_gaussian_outcome, quantum_potential_suite, splitting_errors,
    unitarity,
};
use oscbohm::harness::{run_single, run_sweep, ConvergenceReport, ExperimentConfig};

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn column(report: &ConvergenceReport, f: impl Fn(&oscbohm::ReportRow) -> Option<f64>) -> Vec<f64> {
    report.rows.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect()
}

fn fmt_seq(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() {
    let mut results = Vec::new();

    // 1. Unitarity.
    let (checks, took) = timed(|| unitarity().expect("unitarity run"));
    let drift = checks[0].value;
    results.push(Outcome {
        id: 1,
        name: "unitarity",
        passed: drift <= 1e-9 && took <= Duration::from_secs(10),
        detail: format!("max norm drift {drift:.3e} (<= 1e-9), {:.2}s (<= 10s)", took.as_secs_f64()),
    });

    // 2. Degenerate homogenization, and the exact-zero half of criterion 7.
    let mut degenerate = ExperimentConfig::harmonic_benchmark();
    degenerate.potential.temporal = TemporalSpec::Constant { value: 1.0 };
    let (rows, took) = timed(|| {
        [0.2, 0.025]
            .iter()
            .map(|&eps| run_single(&degenerate, eps).expect("degenerate run"))
            .collect::<Vec<_>>()
    });
    let h1: Vec<f64> = rows.iter().map(|r| r.h1_wave.unwrap_or(f64::INFINITY)).collect();
    let degenerate_dev: Vec<f64> = rows.iter().map(|r| r.traj_dev[0].value).collect();
    results.push(Outcome {
        id: 2,
        name: "degenerate homogenization",
        passed: rows.iter().all(|r| r.valid)
            && h1.iter().all(|v| *v <= 5e-9)
            && took <= Duration::from_secs(30),
        detail: format!("H1 distances [{}] (<= 5e-9), {:.2}s (<= 30s)", fmt_seq(&h1), took.as_secs_f64()),
    });

    // 3-7. Harmonic benchmark sweep.
    let bench = ExperimentConfig::harmonic_benchmark();
    let (report, took) = timed(|| run_sweep(&bench).expect("benchmark sweep"));
    let all_valid = report.rows.iter().all(|r| r.valid) && !report.metadata.partial;

    let h1 = column(&report, |r| r.h1_wave);
    results.push(Outcome {
        id: 3,
        name: "wave-function convergence",
        passed: all_valid
            && strictly_decreasing(&h1)
            && h1[3] <= 0.25 * h1[0]
            && took <= Duration::from_secs(300),
        detail: format!("h1 [{}], last/first {:.3} (<= 0.25), {:.1}s (<= 300s)", fmt_seq(&h1), h1[3] / h1[0], took.as_secs_f64()),
    });

    let rho = column(&report, |r| r.l1_rho);
    let cur = column(&report, |r| r.l1_current);
    results.push(Outcome {
        id: 4,
        name: "density convergence",
        passed: all_valid
            && strictly_decreasing(&rho)
            && strictly_decreasing(&cur)
            && rho[3] <= 0.25 * rho[0]
            && cur[3] <= 0.25 * cur[0],
        detail: format!("l1 rho [{}], l1 J [{}]", fmt_seq(&rho), fmt_seq(&cur)),
    });

    let b = column(&report, |r| r.b_eps_avg);
    results.push(Outcome {
        id: 5,
        name: "Gronwall integrand decay",
        passed: all_valid && strictly_decreasing(&b),
        detail: format!("time-averaged b [{}]", fmt_seq(&b)),
    });

    let mono = column(&report, |r| r.monokinetic_dev);
    results.push(Outcome {
        id: 6,
        name: "mono-kinetic measure limit",
        passed: all_valid && strictly_decreasing(&mono),
        detail: format!("flat distance [{}]", fmt_seq(&mono)),
    });

    let dev: Vec<f64> = report.rows.iter().map(|r| r.traj_dev.first().map_or(f64::NAN, |d| d.value)).collect();
    let nonincreasing = dev.windows(2).all(|w| w[1] <= w[0]);
    results.push(Outcome {
        id: 7,
        name: "trajectory convergence in measure",
        passed: all_valid
            && nonincreasing
            && dev[3] <= 0.5 * dev[0]
            && dev[0] > 0.0
            && degenerate_dev.iter().all(|v| *v == 0.0),
        detail: format!(
            "deviation fraction [{}], identical dynamics [{}]",
            fmt_seq(&dev),
            fmt_seq(&degenerate_dev)
        ),
    });

    // 8. Free Gaussian.
    let free = free_gaussian_outcome().expect("free gaussian");
    results.push(Outcome {
        id: 8,
        name: "free-Gaussian oracle",
        passed: free.max_trajectory_error <= 1e-3 && (free.variance - 2.0).abs() <= 1e-4 && free.samples_checked > 0,
        detail: format!(
            "max |X - sqrt2 x0| {:.3e} over {} samples (<= 1e-3), |var - 2| {:.3e} (<= 1e-4)",
            free.max_trajectory_error,
            free.samples_checked,
            (free.variance - 2.0).abs()
        ),
    });

    // 9. Quantum potential.
    let q = quantum_potential_suite().expect("quantum potential");
    results.push(Outcome {
        id: 9,
        name: "quantum potential oracle",
        passed: q.iter().all(|c| c.passed),
        detail: format!("|Q(0) + 1/4| {:.3e}, max interior error {:.3e} (<= 1e-6)", q[0].value, q[1].value),
    });

    // 10. Continuity law.
    let coarse = continuity_residual(1e-3).expect("continuity");
    let fine = continuity_residual(5e-4).expect("continuity");
    let ratio = coarse / fine;
    results.push(Outcome {
        id: 10,
        name: "continuity law",
        passed: coarse <= 1e-6 && (3.5..=4.5).contains(&ratio),
        detail: format!("residual {coarse:.3e} at dt=1e-3 (<= 1e-6), ratio {ratio:.3} (4 +/- 0.5)"),
    });

    // 11. Splitting order.
    let errs = splitting_errors().expect("splitting");
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0].1 / w[1].1).collect();
    results.push(Outcome {
        id: 11,
        name: "splitting order",
        passed: ratios.iter().all(|r| *r >= 4.0 / 1.5 && *r <= 6.0),
        detail: format!("error ratios [{}] (4 within factor 1.5)", fmt_seq(&ratios)),
    });

    // 12. Determinism across thread counts.
    let in_pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| run_sweep(&bench).expect("pooled sweep"))
            .without_wall_time()
            .to_json()
            .unwrap()
    };
    let reference = report.without_wall_time().to_json().unwrap();
    let one = in_pool(1);
    let four = in_pool(4);
    let same = reference == one && one == four;
    results.push(Outcome {
        id: 12,
        name: "determinism",
        passed: same,
        detail: format!("report.json identical for default, 1 and 4 worker threads: {same}"),
    });

    println!();
    for r in &results {
        println!(
            "criterion {:>2} {:<36} {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {} failed", results.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
