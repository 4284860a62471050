//! The `simulate` command: integrate the configured run and write the
//! trajectory, diagnostics and manifest artifacts.

use std::path::{Path, PathBuf};

use strand_core::{simulate, ScalarField, Trajectory};

use crate::config::RunConfig;
use crate::report::{
    artifact, ensure_dir, write_diagnostics_csv, write_energy_csv, write_field_csv, write_json,
    write_matrix_csv, AnalyticCheck, Manifest, Termination,
};
use crate::CliError;

pub struct SimulateOutcome {
    pub manifest: Manifest,
    pub out_dir: PathBuf,
    /// Set when the run aborted on a singular state (after flushing the
    /// partial artifacts).
    pub failure: Option<String>,
}

/// Closed-form final configuration for the analytic presets.
fn analytic_final(cfg: &RunConfig, t: f64) -> Option<(String, ScalarField)> {
    let grid = cfg.build_grid().ok()?;
    match cfg.initial.preset.as_str() {
        "translation" => {
            let v = cfg.initial.params.get("velocity")?.as_f64()?;
            Some((
                "translation".to_string(),
                ScalarField::from_fn(grid, |x| x + v * t).ok()?,
            ))
        }
        "scaling" => {
            let r = cfg.initial.params.get("rate")?.as_f64()?;
            let factor = (1.0 + 3.0 * r * t).powf(1.0 / 3.0);
            Some((
                "scaling".to_string(),
                ScalarField::from_fn(grid, |x| x * factor).ok()?,
            ))
        }
        _ => None,
    }
}

fn snapshot_rows(traj: &Trajectory, every: usize) -> Vec<usize> {
    let m = traj.states().len();
    if every == 0 {
        return vec![0, m - 1];
    }
    let mut rows: Vec<usize> = (0..m).step_by(every).collect();
    if *rows.last().unwrap() != m - 1 {
        rows.push(m - 1);
    }
    rows
}

pub fn cmd_simulate(cfg: &RunConfig, out_override: Option<&Path>) -> Result<SimulateOutcome, CliError> {
    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
    ensure_dir(&out_dir)?;

    let init = cfg.build_initial_state()?;
    let force = cfg.build_force()?;
    let result = simulate(&init, &force, cfg.time.t_end, cfg.time.dt, cfg.scheme());
    let (traj, failure) = match &result {
        Ok(t) => (t, None),
        Err(abort) => (&abort.partial, Some(abort.cause.to_string())),
    };

    let mut artifacts = vec![
        "manifest.json".to_string(),
        "diagnostics.csv".to_string(),
        "energy.csv".to_string(),
        "final_phi.csv".to_string(),
        "final_v.csv".to_string(),
    ];
    write_diagnostics_csv(&artifact(&out_dir, "diagnostics.csv"), traj)?;
    write_energy_csv(&artifact(&out_dir, "energy.csv"), traj)?;

    let grid_nodes: Vec<f64> = traj.initial_state().grid().nodes().collect();
    write_field_csv(
        &artifact(&out_dir, "final_phi.csv"),
        &grid_nodes,
        traj.final_state().config().values(),
    )?;
    write_field_csv(
        &artifact(&out_dir, "final_v.csv"),
        &grid_nodes,
        traj.final_state().velocity().values(),
    )?;
    let rows = snapshot_rows(traj, cfg.outputs.snapshot_every);
    let phi_rows: Vec<(f64, &[f64])> = rows
        .iter()
        .map(|&j| (traj.states()[j].t(), traj.states()[j].config().values()))
        .collect();
    let v_rows: Vec<(f64, &[f64])> = rows
        .iter()
        .map(|&j| (traj.states()[j].t(), traj.states()[j].velocity().values()))
        .collect();
    if cfg.outputs.formats.iter().any(|f| f == "csv") {
        write_matrix_csv(&artifact(&out_dir, "trajectory_phi.csv"), &grid_nodes, &phi_rows)?;
        write_matrix_csv(&artifact(&out_dir, "trajectory_v.csv"), &grid_nodes, &v_rows)?;
        artifacts.push("trajectory_phi.csv".to_string());
        artifacts.push("trajectory_v.csv".to_string());
    }
    if cfg.outputs.formats.iter().any(|f| f == "json") {
        let series: Vec<serde_json::Value> = traj
            .diagnostics()
            .iter()
            .map(|d| {
                serde_json::json!({
                    "t": d.t,
                    "kinetic": d.kinetic,
                    "flux": d.boundary_flux,
                    "min_phi_x": d.min_phi_x,
                })
            })
            .collect();
        write_json(&artifact(&out_dir, "diagnostics.json"), &series)?;
        artifacts.push("diagnostics.json".to_string());
    }

    let final_state = traj.final_state();
    let analytic_check = if failure.is_none() {
        analytic_final(cfg, final_state.t()).map(|(case, exact)| {
            let max_final_error = final_state
                .config()
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let tolerance = cfg.outputs.analytic_tolerance;
            AnalyticCheck {
                case,
                max_final_error,
                tolerance,
                pass: tolerance.map(|tol| max_final_error <= tol),
            }
        })
    } else {
        None
    };

    let manifest = Manifest {
        tool: "strand".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "simulate".to_string(),
        config: cfg.clone(),
        termination: Termination {
            status: if failure.is_none() {
                "completed".to_string()
            } else {
                "singular_state".to_string()
            },
            message: failure.clone(),
            t_final: final_state.t(),
            states_recorded: traj.states().len(),
        },
        analytic_check,
        artifacts,
    };
    write_json(&artifact(&out_dir, "manifest.json"), &manifest)?;

    Ok(SimulateOutcome {
        manifest,
        out_dir,
        failure,
    })
}
