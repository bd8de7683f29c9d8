//! Scenario files, end-to-end runs and their outputs.
//!
//! A run goes: scenario spec, grid configuration, velocity and forcing
//! sampling, assembly in swept order, approximate sweeping factorization,
//! preconditioned GMRES, then the solution field (natural order), a JSON
//! report and optionally a rank profile CSV.

mod report;
mod run;
mod spec;

use thiserror::Error;

pub use report::{validate_report, ScenarioReport, REPORT_SCHEMA};
pub use run::{run_direction_study, run_scenario, DirectionStudy, OutputBundle, RunOutcome};
pub use spec::{boundary_from_text, boundary_to_text, describe_forcing, describe_velocity, ScenarioSpec};

/// Stage-labelled failure of a scenario run. Each stage has its own process
/// exit code, see [`ScenarioError::exit_code`].
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("factorization error: {0}")]
    Factorization(String),
    #[error("solve error: {0}")]
    Solve(String),
    #[error(
        "GMRES did not converge in {} iterations (preconditioned residual {:.3e})",
        .0.solve.iterations,
        .0.solve.resid_history.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence(Box<RunOutcome>),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid report: {}", .0.join("; "))]
    Report(Vec<String>),
}

impl ScenarioError {
    /// 2 spec, 3 assembly, 4 factorization, 5 solve/non-convergence, 6 I/O or bad report file.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Spec(_) => 2,
            ScenarioError::Assembly(_) => 3,
            ScenarioError::Factorization(_) => 4,
            ScenarioError::Solve(_) | ScenarioError::NonConvergence(_) => 5,
            ScenarioError::Io(_) | ScenarioError::Report(_) => 6,
        }
    }
}
