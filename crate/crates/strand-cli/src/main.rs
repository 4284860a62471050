use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use strand_cli::report::fmt_f64;
use strand_cli::{cmd_convergence, cmd_simulate, cmd_verify, RunConfig};

/// Geodesic and forced motion of one-dimensional embedded bodies.
#[derive(Parser)]
#[command(name = "strand", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured run and write trajectory artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `outputs.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured verification suites and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical convergence study for the analytic presets.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Number of joint (h, dt) halvings to run.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: Cli) -> Result<i32, strand_cli::CliError> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = cmd_simulate(&cfg, out.as_deref())?;
            let m = &outcome.manifest;
            println!(
                "simulate: {} ({} states, t_final = {})",
                m.termination.status,
                m.termination.states_recorded,
                fmt_f64(m.termination.t_final)
            );
            if let Some(check) = &m.analytic_check {
                println!(
                    "analytic check [{}]: max final error {}{}",
                    check.case,
                    fmt_f64(check.max_final_error),
                    match check.pass {
                        Some(true) => " PASS",
                        Some(false) => " FAIL",
                        None => "",
                    }
                );
            }
            println!("artifacts in {}", outcome.out_dir.display());
            if let Some(msg) = &outcome.failure {
                eprintln!("error: {msg}");
                Ok(2)
            } else {
                Ok(0)
            }
        }
        Command::Verify { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = cmd_verify(&cfg)?;
            for suite in &report.suites {
                for t in &suite.tests {
                    let order = t
                        .order_estimate
                        .map(|o| format!(" order={o:.2}"))
                        .unwrap_or_default();
                    println!(
                        "{}/{}: measured={:.3e} tolerance={:.3e}{} {}",
                        suite.suite,
                        t.name,
                        t.measured,
                        t.tolerance,
                        order,
                        if t.pass { "PASS" } else { "FAIL" }
                    );
                }
            }
            println!("verify: {}", if report.pass { "PASS" } else { "FAIL" });
            Ok(if report.pass { 0 } else { 3 })
        }
        Command::Convergence { config, levels } => {
            let cfg = RunConfig::load(&config)?;
            let rows = cmd_convergence(&cfg, levels)?;
            println!("level,h,dt,error,observed_order");
            for r in &rows {
                println!(
                    "{},{},{},{},{}",
                    r.level,
                    fmt_f64(r.h),
                    fmt_f64(r.dt),
                    fmt_f64(r.error),
                    r.observed_order.map(|o| format!("{o:.3}")).unwrap_or_default()
                );
            }
            Ok(0)
        }
    }
}
