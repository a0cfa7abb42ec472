//! Backpropagation through time, Adam, clipping and the epoch loop.

mod backward;
mod gradcheck;
mod optim;
mod trainer;

pub use backward::{accumulate_gradients, backward, example_loss, Gradients};
pub use gradcheck::{
    grad_check, relative_error, GradCheckOptions, GradCheckReport, GRADCHECK_TOLERANCE,
    MIN_SAMPLED_COORDS,
};
pub use optim::{adam_update, clip_gradients, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use trainer::{
    encode_examples, loss_and_accuracy, train, train_encoded, EncodedExample, EpochRecord,
    TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_CLIP_NORM, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_PARAM_MAGNITUDE,
};

use thiserror::Error;

use crate::model::ModelError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("forward cache has {caches} steps but the sequence has {valid_len} valid tokens")]
    CacheMismatch { caches: usize, valid_len: usize },
    #[error("gradients contain non-finite values")]
    NonFiniteGradient,
    #[error("optimizer produced non-finite parameters")]
    NonFiniteParameters,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("gradient checking needs 64-bit parameters, got {bits}-bit")]
    PrecisionRequired { bits: u32 },
    #[error("training and validation sets must both be non-empty")]
    EmptyData,
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        /// Completed epochs before the divergence.
        history: Vec<EpochRecord>,
    },
}
