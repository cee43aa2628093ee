use thiserror::Error;

/// Errors raised while constructing or encoding FOFE values.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FofeError {
    #[error("forgetting factor must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("token id {id} out of range for vocabulary size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("vocabulary size must be positive")]
    EmptyVocabulary,
    #[error("forgetting matrix order must be at least 1")]
    ZeroOrder,
    #[error("matrix encoding needs a non-empty sequence")]
    EmptySequence,
    #[error("sentence {index} of the batch is empty")]
    EmptySentenceInBatch { index: usize },
    #[error("sentence {index} has vocabulary size {found}, batch uses {expected}")]
    VocabMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding has {rows} rows but the vocabulary has {vocab_size} tokens")]
    EmbeddingShape { rows: usize, vocab_size: usize },
}

/// Why a code could not be turned back into a token sequence.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("ambiguous: {candidates} tokens could occupy position {lag} from the end (alpha > 0.5)")]
    Ambiguous { lag: usize, candidates: usize },
    #[error("malformed: {reason}")]
    Malformed { reason: String },
    #[error("too-long: decoded length exceeds max_len {max_len}")]
    TooLong { max_len: usize },
}

impl DecodeError {
    /// Short stable tag, used by the command line.
    pub fn tag(&self) -> &'static str {
        match self {
            DecodeError::Ambiguous { .. } => "ambiguous",
            DecodeError::Malformed { .. } => "malformed",
            DecodeError::TooLong { .. } => "too-long",
        }
    }
}
