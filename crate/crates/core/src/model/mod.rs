//! Backbone networks, temporal shift, segmental consensus, loss and training.
//!
//! Activations are `[T, C, H, W]` arrays where `T` indexes the frames of one
//! snippet. Parameters of a network live in one flat `Vec<f64>`; layers hold
//! offsets into it, so gradients, optimizer state and checkpoints are flat too.

mod checkpoint;
mod layers;
mod loss;
mod network;
mod optim;
mod scores;
mod shift;
mod train;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, StreamHeader, CHECKPOINT_VERSION};
pub use loss::{bce_multilabel, bce_multilabel_grad, sigmoid};
pub use network::{image_to_tensor, Architecture, Backbone, Normalization, SnippetTrace, TinySpec};
pub use optim::{LrSchedule, OptimizerConfig, Sgd};
pub use scores::{consensus, EmotionScores, ScoreKind};
pub use shift::{shifted_channels, temporal_shift, temporal_shift_adjoint, ShiftConfig, ShiftPlacement};
pub use train::{clip_gradient, train_step, ClipInput, StepOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shift fraction {fraction} is invalid for {channels} channels: {reason}")]
    InvalidFraction { fraction: f64, channels: usize, reason: String },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("consensus over an empty list of scores")]
    EmptyList,
    #[error("score kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { expected: ScoreKind, got: ScoreKind },
    #[error("non-finite loss {loss} at {context}")]
    NonFiniteLoss { loss: f64, context: String },
    #[error("label index {0} outside 0..8")]
    InvalidLabel(usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
