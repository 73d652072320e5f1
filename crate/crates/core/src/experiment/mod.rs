//! Declarative scenario runner: configs, Monte Carlo pipelines per mode,
//! boundedness verdicts and report files.

pub mod boundedness;
pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

pub use boundedness::{boundedness_after, boundedness_test, BoundednessResult, Verdict};
pub use config::{HybridScenario, Mode, ScenarioConfig};
pub use report::{MomentTable, Report};
pub use runner::{load_scenario, run_config_file, run_scenario, validate_scenario, RunOptions, RunOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ExperimentError {
    /// 2 for schema errors, 3 for failed preconditions, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema(_) => 2,
            Self::Precondition(_) => 3,
            Self::Simulation(_) | Self::Io(_) => 1,
        }
    }
}

/// `(name, description)` of every mode.
pub fn list_modes() -> Vec<(&'static str, &'static str)> {
    Mode::ALL.iter().map(|m| (m.name(), m.description())).collect()
}
