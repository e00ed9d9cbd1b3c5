//! Tiny autoregressive token policy.
//!
//! ```text
//! s_0     = W_f · f
//! logits_t = E · s_t + b            p(id_t | ·) = softmax(logits_t)
//! s_{t+1} = tanh(W_s · s_t + E[id_t])
//! ```
//!
//! `E` is shared between input and output. All parameters live in one
//! [`PolicyParams`], which doubles as the gradient type.

mod features;
mod model;
mod params;
mod sft;

pub use features::{features, ScenarioFeatures, FEATURE_DIM};
pub use model::{
    accumulate_grad, grad_log_prob, greedy, log_prob, sample, sample_with_log_probs, step_distribution,
};
pub use params::PolicyParams;
pub use sft::{mean_log_likelihood, sft_fit, SftConfig, SftResult};

use thiserror::Error;

use crate::tokenizer::TokenizerError;

/// Default hidden width.
pub const DEFAULT_DIM: usize = 16;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no demonstrations to fit")]
    NoDemos,
    #[error("feature vector has {got} entries, policy expects {expected}")]
    FeatureDim { expected: usize, got: usize },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
