//! Fixed-size ordinally-forgetting encoding (FOFE) and FOFE-driven
//! feedforward neural language models.
//!
//! * [`encoding`]: recursive, matrix, batched and embedding-space encoders,
//!   plus exact decoding.
//! * [`uniqueness`]: collision counting and critical forgetting factors.
//! * [`corpus`]: vocabulary, tokenization and mini-batching.
//! * [`nnlm`]: the feedforward language model, its training loop and
//!   perplexity evaluation.
//! * [`toy`]: a seeded synthetic corpus with long-range structure.

pub mod corpus;
pub mod encoding;
pub mod error;
pub mod nnlm;
pub mod toy;
pub mod uniqueness;

pub use encoding::{ForgettingFactor, TokenSequence};
pub use error::{DecodeError, FofeError};
