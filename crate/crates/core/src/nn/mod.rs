//! Minimal dense network engine: forward pass, analytic backpropagation,
//! Adam and the symlog/symexp pair.

mod adam;
mod checkpoint;
mod matrix;
mod mlp;
mod symlog;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{AdamCheckpoint, MlpCheckpoint, CHECKPOINT_SCHEMA_VERSION};
pub use matrix::Matrix;
pub use mlp::{softmax_in_place, Activation, Dense, ForwardCache, Gradients, Mlp};
pub use symlog::{symexp, symlog, symlog_grad, symlog_slice};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("forward cache is stale; parameters changed since the forward pass")]
    StaleCache,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
