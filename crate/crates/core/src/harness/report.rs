//! Convergence report, CSV/JSON emission and binary field snapshots.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::harness::config::ExperimentConfig;
use crate::solver::WaveFunction;

/// Version tag written into every report.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));

/// Trajectory deviation fraction at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub delta: f64,
    pub value: f64,
}

/// One row per `eps`. Metric fields are `None` when the row is invalid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub h1_wave: Option<f64>,
    pub l1_rho: Option<f64>,
    pub l1_current: Option<f64>,
    pub b_eps_avg: Option<f64>,
    pub monokinetic_dev: Option<f64>,
    pub traj_dev: Vec<DeltaValue>,
    pub boundary_mass: Option<f64>,
    pub injectivity_ratio: Option<f64>,
    pub injectivity_violation_time: Option<f64>,
    pub escaped_fraction: Option<f64>,
    pub h1_final: Option<f64>,
    pub wall_time: f64,
    pub valid: bool,
    pub reason: Option<String>,
}

impl ReportRow {
    pub fn invalid(eps: f64, dt: f64, steps: usize, reason: String, wall_time: f64) -> Self {
        Self {
            eps,
            dt,
            steps,
            h1_wave: None,
            l1_rho: None,
            l1_current: None,
            b_eps_avg: None,
            monokinetic_dev: None,
            traj_dev: Vec::new(),
            boundary_mass: None,
            injectivity_ratio: None,
            injectivity_violation_time: None,
            escaped_fraction: None,
            h1_final: None,
            wall_time,
            valid: false,
            reason: Some(reason),
        }
    }
}

/// `value(eps_from) / value(eps_to)` for consecutive valid rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRatio {
    pub eps_from: f64,
    pub eps_to: f64,
    pub h1_wave: f64,
    pub l1_rho: f64,
    pub l1_current: f64,
    pub b_eps_avg: f64,
    pub monokinetic_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub dx: f64,
    pub partial: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: Metadata,
    pub rows: Vec<ReportRow>,
    pub ratios: Vec<DecayRatio>,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let digest = Sha256::digest(config.canonical_json().as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Values below this are treated as zero when forming decay ratios.
const RATIO_FLOOR: f64 = 1e-300;

impl ConvergenceReport {
    /// Assembles a report; rows are sorted by decreasing `eps`.
    pub fn assemble(config: &ExperimentConfig, mut rows: Vec<ReportRow>) -> Result<Self> {
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        let grid = config.build_grid()?;
        let degenerate = config.build_potential().is_time_independent();
        let mut ratios = Vec::new();
        for w in rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if !(a.valid && b.valid) {
                continue;
            }
            let r = |x: Option<f64>, y: Option<f64>| -> f64 {
                if degenerate {
                    return 1.0;
                }
                match (x, y) {
                    (Some(x), Some(y)) if y.abs() > RATIO_FLOOR => x / y,
                    _ => 1.0,
                }
            };
            ratios.push(DecayRatio {
                eps_from: a.eps,
                eps_to: b.eps,
                h1_wave: r(a.h1_wave, b.h1_wave),
                l1_rho: r(a.l1_rho, b.l1_rho),
                l1_current: r(a.l1_current, b.l1_current),
                b_eps_avg: r(a.b_eps_avg, b.b_eps_avg),
                monokinetic_dev: r(a.monokinetic_dev, b.monokinetic_dev),
            });
        }
        let note = degenerate.then(|| {
            "time-independent potential: both systems coincide, decay ratios set to 1".to_string()
        });
        Ok(Self {
            metadata: Metadata {
                config_hash: config_hash(config),
                code_version: CODE_VERSION.to_string(),
                config: config.clone(),
                dx: grid.dx(),
                partial: rows.iter().any(|r| !r.valid),
                note,
            },
            rows,
            ratios,
        })
    }

    /// Copy with every `wall_time` zeroed, for reproducibility comparisons.
    pub fn without_wall_time(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.wall_time = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "eps".to_string(),
            "h1_wave".into(),
            "l1_rho".into(),
            "l1_current".into(),
            "b_eps_avg".into(),
            "monokinetic_dev".into(),
        ];
        for d in &self.metadata.config.delta_list {
            cols.push(format!("traj_dev_delta_{d}"));
        }
        cols.extend(
            ["boundary_mass", "injectivity_ratio", "valid", "reason"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![fmt_float(row.eps)];
            for v in [
                row.h1_wave,
                row.l1_rho,
                row.l1_current,
                row.b_eps_avg,
                row.monokinetic_dev,
            ] {
                cells.push(fmt_opt(v));
            }
            for d in &self.metadata.config.delta_list {
                let v = row.traj_dev.iter().find(|x| x.delta == *d).map(|x| x.value);
                cells.push(fmt_opt(v));
            }
            cells.push(fmt_opt(row.boundary_mass));
            cells.push(fmt_opt(row.injectivity_ratio));
            cells.push(row.valid.to_string());
            cells.push(csv_escape(row.reason.as_deref().unwrap_or("")));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_csv())
}

pub fn emit_json(report: &ConvergenceReport, path: &Path) -> Result<()> {
    write_text(path, &report.to_json()?)
}

pub fn read_json(path: &Path) -> Result<ConvergenceReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConvergenceReport::from_json(&text)
}

/// Writes `report.csv` and `report.json` into `dir`, creating it if needed.
pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    emit_csv(report, &dir.join("report.csv"))?;
    emit_json(report, &dir.join("report.json"))
}

/// Binary snapshot: `u32 dim`, `u32 n`, `f64 L`, `f64 time`, then
/// interleaved real/imaginary parts, all little-endian.
pub fn write_field(psi: &WaveFunction, path: &Path) -> Result<()> {
    let grid = psi.grid();
    let mut buf = Vec::with_capacity(24 + 16 * grid.len());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.n_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&grid.half_width().to_le_bytes());
    buf.extend_from_slice(&psi.time.to_le_bytes());
    for v in psi.field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<WaveFunction> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = || Error::Serde(format!("malformed field file {}", path.display()));
    if bytes.len() < 24 {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let grid = Grid::new(u32_at(0), u32_at(4), f64_at(8))?;
    let time = f64_at(16);
    if bytes.len() != 24 + 16 * grid.len() {
        return Err(bad());
    }
    let values = (0..grid.len())
        .map(|i| Complex64::new(f64_at(24 + 16 * i), f64_at(32 + 16 * i)))
        .collect();
    Ok(WaveFunction::new(ComplexField::new(grid, values)?, time))
}
