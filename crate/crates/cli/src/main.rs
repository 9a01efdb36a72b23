use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use oscbohm::harness::run::{resolve_out_dir, run_one_to, run_sweep_to};
use oscbohm::harness::{verify, ConvergenceReport, ExperimentConfig};
use oscbohm::Error;

#[derive(Parser)]
#[command(name = "oscbohm", version, about = "Oscillating-potential homogenization and Bohmian trajectory experiments")]
struct Cli {
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single eps and write report.csv / report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to the first entry of eps_list.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Run every eps in the config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named invariant suite.
    Verify {
        #[arg(long)]
        suite: String,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn summarize(report: &ConvergenceReport) {
    for row in &report.rows {
        match (row.valid, row.h1_wave) {
            (true, Some(h1)) => println!(
                "eps {:<8} h1 {:.4e}  l1_rho {:.4e}  mono {:.4e}  ({:.2}s)",
                row.eps,
                h1,
                row.l1_rho.unwrap_or(f64::NAN),
                row.monokinetic_dev.unwrap_or(f64::NAN),
                row.wall_time
            ),
            _ => println!(
                "eps {:<8} invalid: {}",
                row.eps,
                row.reason.as_deref().unwrap_or("unknown")
            ),
        }
    }
    if report.metadata.partial {
        println!("report is partial: some rows are invalid");
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, eps } => {
            let cfg = load(&config, cli.seed)?;
            let dir = resolve_out_dir(&cfg, out)?;
            let report = run_one_to(&cfg, eps, &dir)?;
            summarize(&report);
            println!("wrote {}", dir.display());
            Ok(if report.metadata.partial {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config, cli.seed)?;
            let dir = resolve_out_dir(&cfg, out)?;
            let report = run_sweep_to(&cfg, &dir)?;
            summarize(&report);
            println!("wrote {}", dir.display());
            Ok(if report.metadata.partial {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Verify { suite } => {
            let report = verify(&suite)?;
            println!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")
        {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Usage(_) | Error::Config(_))
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
