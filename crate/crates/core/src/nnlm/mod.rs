//! FOFE-based feedforward neural network language model.
//!
//! Each position `t` of a sentence is one training example: the target is
//! `w_t` and the input is built from the history `w_1 .. w_{t-1}`:
//!
//! * `fofe1`: the FOFE code of the history projected through the embedding,
//!   `z_{t-1} U`, computed as decayed embedding rows.
//! * `fofe2`: `[z_{t-1} U, z_{t-2} U]`.
//! * `ngramN`: the embeddings of the last `N - 1` words, zero-padded at the
//!   start of the sentence.
//!
//! The input feeds ReLU hidden layers and a full-vocabulary softmax. The decay
//! coefficients are constants, so gradients reach the embedding through the
//! transpose of the forgetting matrix, which is one backward sweep per
//! sentence; no backpropagation through time is involved.

mod config;
mod eval;
mod io;
mod model;
mod params;
mod train;

use thiserror::Error;

pub use config::{InputMode, ModelConfig, TrainConfig};
pub use eval::{perplexity, PerplexityReport};
pub use io::{load_model, parse_model, read_model, save_model, write_model, ModelIoError, MODEL_MAGIC, MODEL_VERSION};
pub use model::{build_inputs, forward, logits, loss_and_grads};
pub use params::{init_params, Dense, ModelParams};
pub use train::{train, EpochLog, LrSchedule, TrainLog};

/// Floating-point types the network can run in.
pub trait Real:
    ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::Float
    + std::ops::AddAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnlmError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("non-finite value in parameter tensor {tensor} after update")]
    NonFiniteParams { tensor: String },
    #[error("input has {found} columns, model expects {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("vocab-mismatch: model has {model} tokens, data uses {data}")]
    VocabMismatch { model: usize, data: usize },
    #[error("token id {id} out of range for vocabulary size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("diverged at epoch {epoch}: validation perplexity {ppl} exceeds {limit}")]
    Diverged { epoch: usize, ppl: f64, limit: f64 },
}
