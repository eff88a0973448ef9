//! Compositional predictive decision-making: supervised h1/h2/h3
//! predictors and exhaustive search over bounded parameter changes.

pub mod audit;
pub mod predictors;
pub mod runner;
pub mod search;
pub mod thresholds;

pub use predictors::{Prediction, PredictorConfig, PredictorMetrics, PredictorSet, Sample};
pub use runner::{CpdmConfig, CpdmController, RefitRecord};
pub use search::{delta_space_ca, delta_space_cpa, score, select_action_cpdm, select_action_cpdm_pair, Candidate, Decision, DeltaActionSpace, ScoreMode};
pub use thresholds::{build_thresholds, ThresholdTable};

use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CpdmError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("input width: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("predictor training diverged")]
    Diverged,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
