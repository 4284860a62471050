//! Command-line surface for the one-dimensional embedded-body solver:
//! `simulate` integrates a configured run and writes CSV/JSON artifacts,
//! `verify` runs the packaged verification suites, and `convergence`
//! measures empirical orders against the closed-form geodesics.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 verification failure.

pub mod config;
pub mod convergence;
pub mod report;
pub mod simulate;
pub mod verify;

pub use config::RunConfig;
pub use convergence::cmd_convergence;
pub use simulate::cmd_simulate;
pub use verify::cmd_verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}
