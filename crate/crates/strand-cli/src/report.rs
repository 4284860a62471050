//! Deterministic artifact writers and the report types the commands
//! emit. Floating-point values in CSV are printed with 17 significant
//! digits so text round-trips are bit-exact; JSON uses serde_json's
//! shortest exact representation.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strand_core::Trajectory;

use crate::config::RunConfig;
use crate::CliError;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Diagnostics series: one row per recorded state.
pub fn write_diagnostics_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "t,kinetic,flux,min_phi_x").unwrap();
    for d in traj.diagnostics() {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(d.t),
            fmt_f64(d.kinetic),
            fmt_f64(d.boundary_flux),
            fmt_f64(d.min_phi_x)
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Energy report: kinetic energy, boundary flux and the relative drift
/// of the kinetic energy from its initial value, per recorded state.
pub fn write_energy_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let k0 = traj.diagnostics()[0].kinetic;
    let scale = if k0 == 0.0 { 1.0 } else { k0.abs() };
    let mut out = Vec::new();
    writeln!(out, "t,kinetic,flux,drift").unwrap();
    for d in traj.diagnostics() {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(d.t),
            fmt_f64(d.kinetic),
            fmt_f64(d.boundary_flux),
            fmt_f64((d.kinetic - k0) / scale)
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Nodal field as `x,value` rows.
pub fn write_field_csv(path: &Path, xs: &[f64], values: &[f64]) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "x,value").unwrap();
    for (x, v) in xs.iter().zip(values) {
        writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*v)).unwrap();
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Snapshot matrix: rows are time knots, columns are grid nodes, with a
/// leading time column.
pub fn write_matrix_csv(
    path: &Path,
    grid_nodes: &[f64],
    rows: &[(f64, &[f64])],
) -> Result<(), CliError> {
    let mut out = Vec::new();
    write!(out, "t").unwrap();
    for x in grid_nodes {
        write!(out, ",{}", fmt_f64(*x)).unwrap();
    }
    writeln!(out).unwrap();
    for (t, values) in rows {
        write!(out, "{}", fmt_f64(*t)).unwrap();
        for v in *values {
            write!(out, ",{}", fmt_f64(*v)).unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Closed-form comparison reported by `simulate` for analytic presets.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticCheck {
    pub case: String,
    pub max_final_error: f64,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Termination {
    /// `completed` or `singular_state`.
    pub status: String,
    pub message: Option<String>,
    pub t_final: f64,
    pub states_recorded: usize,
}

/// Manifest echoing the fully resolved configuration and the run
/// outcome; identical configs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub termination: Termination,
    pub analytic_check: Option<AnalyticCheck>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_estimate: Option<f64>,
    pub pass: bool,
}

impl TestReport {
    pub fn against_tolerance(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            tolerance,
            order_estimate: None,
            pass: measured.is_finite() && measured <= tolerance,
        }
    }

    pub fn at_least(name: &str, measured: f64, floor: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            tolerance: floor,
            order_estimate: None,
            pass: measured.is_finite() && measured >= floor,
        }
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order_estimate = Some(order);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub tests: Vec<TestReport>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn new(suite: &str, tests: Vec<TestReport>) -> Self {
        let pass = tests.iter().all(|t| t.pass);
        Self {
            suite: suite.to_string(),
            tests,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

/// One row of the convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub error: f64,
    pub observed_order: Option<f64>,
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "level,h,dt,error,observed_order").unwrap();
    for r in rows {
        let order = r.observed_order.map(fmt_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.level,
            fmt_f64(r.h),
            fmt_f64(r.dt),
            fmt_f64(r.error),
            order
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
