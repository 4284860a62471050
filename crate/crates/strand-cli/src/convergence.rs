//! The `convergence` command: empirical order study against the
//! closed-form geodesics, halving the grid spacing and the time step per
//! level.

use std::path::PathBuf;

use strand_core::{simulate, BodyGrid, ScalarField};

use crate::config::RunConfig;
use crate::report::{artifact, ensure_dir, write_convergence_csv, ConvergenceRow};
use crate::CliError;

/// Exact final configuration of the analytic cases.
fn exact_final(case: &str, cfg: &RunConfig, grid: BodyGrid, t: f64) -> Result<ScalarField, CliError> {
    match case {
        "translation" => {
            let v = cfg
                .initial
                .params
                .get("velocity")
                .and_then(|v| v.as_f64())
                .expect("resolved params");
            Ok(ScalarField::from_fn(grid, |x| x + v * t).expect("finite"))
        }
        "scaling" => {
            let r = cfg
                .initial
                .params
                .get("rate")
                .and_then(|v| v.as_f64())
                .expect("resolved params");
            let cube = 1.0 + 3.0 * r * t;
            if cube <= 0.0 {
                return Err(CliError::Config(format!(
                    "time.t_end: the scaling solution is singular before t = {t}"
                )));
            }
            let factor = cube.powf(1.0 / 3.0);
            Ok(ScalarField::from_fn(grid, |x| x * factor).expect("finite"))
        }
        other => Err(CliError::Config(format!(
            "initial.preset: convergence needs an analytic case (translation or scaling), \
             got `{other}`"
        ))),
    }
}

pub fn cmd_convergence(cfg: &RunConfig, levels: usize) -> Result<Vec<ConvergenceRow>, CliError> {
    if levels == 0 {
        return Err(CliError::Config("levels: must be at least 1".to_string()));
    }
    let case = cfg.initial.preset.clone();
    if case != "translation" && case != "scaling" {
        return Err(CliError::Config(format!(
            "initial.preset: convergence needs an analytic case (translation or scaling), \
             got `{case}`"
        )));
    }

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let mut level_cfg = cfg.clone();
        let factor = 1usize << level;
        level_cfg.grid.n_nodes = (cfg.grid.n_nodes - 1) * factor + 1;
        level_cfg.time.dt = cfg.time.dt / factor as f64;
        let init = level_cfg.build_initial_state()?;
        let force = level_cfg.build_force()?;
        let traj = simulate(
            &init,
            &force,
            level_cfg.time.t_end,
            level_cfg.time.dt,
            level_cfg.scheme(),
        )
        .map_err(|e| CliError::Numerical(e.to_string()))?;
        let final_state = traj.final_state();
        let grid = *final_state.grid();
        let exact = exact_final(&case, cfg, grid, final_state.t())?;
        let error = final_state
            .config()
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        let observed_order = rows
            .last()
            .map(|prev: &ConvergenceRow| (prev.error / error).log2());
        rows.push(ConvergenceRow {
            level,
            h: grid.spacing(),
            dt: level_cfg.time.dt,
            error,
            observed_order,
        });
    }

    let out_dir = PathBuf::from(&cfg.outputs.directory);
    ensure_dir(&out_dir)?;
    write_convergence_csv(&artifact(&out_dir, "convergence.csv"), &rows)?;
    Ok(rows)
}
