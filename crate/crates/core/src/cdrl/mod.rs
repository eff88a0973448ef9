//! TD3 actor-critic learners with compositional critics, order-agnostic
//! replay augmentation and the alternating CA/CPA training loop.

pub mod critic;
pub mod replay;
pub mod td3;
pub mod train;

pub use critic::{compositional_loss, head_losses, Critic, CriticKind, HeadLoss, LossOutput};
pub use replay::{augment_and_push, ReplayBuffer};
pub use td3::{action_dims, ActionDim, Quantizer, StepLoss, Td3Agent, Td3Checkpoint, Td3Config};
pub use train::{alternating_train, BaselineLearner, IntervalLog, LearnerConfig, TrainSchedule, TwoTierLearner};

use crate::agents::AgentError;
use crate::nn::NnError;
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CdrlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("replay buffer holds {have} samples, {needed} needed")]
    BufferTooSmall { needed: usize, have: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
