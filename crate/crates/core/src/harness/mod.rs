//! Experiment orchestration: seeded runs of the five methods, evaluation
//! against the DFLT reference, CSV export and the cross-method comparison.

pub mod compare;
pub mod config;
pub mod evaluate;
pub mod export;
pub mod run;

pub use compare::{MIN_FAILURE_REDUCTION};
pub use compare::{compare, reward_ordering_holds, ComparisonReport, TrendChecks};
pub use config::{ExperimentConfig, Method};
pub use evaluate::{evaluate, evaluate_windows, failure_reduction, KpiReport, KpiRow};
pub use export::{empirical_cdf, export_curves, mean_std};
pub use run::{load_run, load_trace, reference_thresholds, run, run_seed, ParamRecord, RunSummary};

use crate::agents::AgentError;
use crate::cdrl::CdrlError;
use crate::cpdm::CpdmError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("incomplete run: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Cdrl(#[from] CdrlError),
    #[error(transparent)]
    Cpdm(#[from] CpdmError),
}

impl HarnessError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Io(_) => "io",
            HarnessError::Incomplete(_) => "incomplete",
            HarnessError::Sim(_) => "simulation",
            HarnessError::Agent(_) => "agent",
            HarnessError::Cdrl(_) => "cdrl",
            HarnessError::Cpdm(_) => "cpdm",
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(format!("json: {e}"))
    }
}
