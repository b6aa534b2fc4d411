//! Soft actor-critic with hand-derived gradients.

pub mod adam;
pub mod buffer;
pub mod checkpoint;
pub mod learner;
pub mod mlp;
pub mod policy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use learner::{actor_loss_grad, critic_loss_grad, critic_targets, SacLearner, UpdateStats};
pub use mlp::{soft_update, Mlp};
pub use policy::GaussianPolicy;

#[derive(Debug, Error)]
pub enum SacError {
    #[error("shape mismatch: expected {expected} parameters, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("replay buffer holds {size} transitions, {requested} requested")]
    BufferTooSmall { size: usize, requested: usize },
    #[error("invalid SAC hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("non-finite parameters after update {update}")]
    NonFinite { update: u64 },
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacHyper {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Fixed entropy coefficient.
    pub alpha: f64,
    pub grad_steps: usize,
    /// Environment steps with uniform random actions and no updates.
    pub warmup_steps: usize,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for SacHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 128,
            alpha: 0.05,
            grad_steps: 1,
            warmup_steps: 1000,
            hidden: vec![64, 64],
            buffer_capacity: 200_000,
        }
    }
}

impl SacHyper {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: &str| Err(SacError::InvalidHyper(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.lr > 0.0) || !(self.alpha >= 0.0) {
            return bad("lr must be positive and alpha non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty and positive");
        }
        Ok(())
    }
}
