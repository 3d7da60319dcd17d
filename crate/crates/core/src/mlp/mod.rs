//! Dense feed-forward network trained by backpropagation.
//!
//! Hidden layers compute affine → batch-norm (optional) → ReLU → inverted
//! dropout; the output layer is a single sigmoid unit. Batches are
//! row-major: one sample per row.

mod layer;
mod loss;
mod model;

pub use layer::{Activation, BatchNormState, DenseLayer};
pub use loss::{cross_entropy, mean_cross_entropy, sigmoid, PROB_EPSILON};
pub use model::{ForwardCache, Gradients, LayerGradients, MlpModel, Mode, ModelConfig, Verdict};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("stale or mismatched forward cache: {0}")]
    StaleCache(String),
    #[error("learning rate must be finite and non-negative, got {0}")]
    InvalidLearningRate(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
