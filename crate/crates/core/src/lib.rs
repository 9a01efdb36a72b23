//! Numerical study of Schrödinger equations with potentials oscillating on a
//! fast time scale `t / eps`, their time-averaged effective equation, and the
//! associated Bohmian trajectories and phase-space measures.

pub mod bohm;
pub mod error;
pub mod grid;
pub mod harness;
pub mod measure;
pub mod potential;
pub mod quadrature;
pub mod solver;

pub use bohm::{DensityFields, ForceModel, TrajectoryEnsemble, VelocitySeries};
pub use error::{Error, Result};
pub use grid::{ComplexField, Grid, Norms};
pub use harness::{ConvergenceReport, ExperimentConfig, ReportRow};
pub use measure::{InjectivityReport, PhaseSpaceMeasure, TestDictionary};
pub use potential::{SpatialProfile, StaticPotential, TemporalProfile, TimePeriodicPotential};
pub use solver::{InitialState, Propagator, SolverConfig, System, WaveFunction};
