//! Experiment orchestration: configuration, sweeps, verification suites and reports.

pub mod config;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, GridSpec, InitialSpec, PotentialSpec, SolverSpec, SpatialSpec, TemporalSpec};
pub use report::{emit_csv, emit_json, read_field, read_json, write_field, ConvergenceReport, ReportRow};
pub use run::{run_single, run_sweep, run_sweep_to, Schedule};
pub use verify::{verify, VerifyReport, SUITES};
