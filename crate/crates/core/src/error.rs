use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("inconsistent effective potential: quadrature mean {quadrature} vs analytic mean {analytic}")]
    Inconsistent { quadrature: f64, analytic: f64 },

    #[error("potential validity failure: {0}")]
    Validity(String),

    #[error("initial state under-resolved: width {width} spans {points:.2} grid spacings (need at least 8 across 2*width)")]
    Resolution { width: f64, points: f64 },

    #[error("initial state too close to the box edge: boundary mass {mass:e}")]
    Placement { mass: f64 },

    #[error("boundary mass {mass:e} exceeds limit {limit:e} at t = {time}")]
    BoundaryMass { mass: f64, limit: f64, time: f64 },

    #[error("H1 norm blow-up: {norm} exceeds {factor} x initial {initial} at t = {time}")]
    BlowUp {
        norm: f64,
        initial: f64,
        factor: f64,
        time: f64,
    },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("trajectory run invalid: {flagged} of {total} samples left the box")]
    Escaped { flagged: usize, total: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
