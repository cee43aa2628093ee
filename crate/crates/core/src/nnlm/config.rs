use std::fmt;
use std::str::FromStr;

use super::NnlmError;
use crate::encoding::ForgettingFactor;

/// How the history of a position is turned into network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// `z_{t-1} U`.
    Fofe1,
    /// `[z_{t-1} U, z_{t-2} U]`.
    Fofe2,
    /// The previous `n - 1` word embeddings; `n >= 2`.
    Ngram(usize),
}

impl InputMode {
    /// Number of `D`-wide input slots.
    pub fn slots(self) -> usize {
        match self {
            InputMode::Fofe1 => 1,
            InputMode::Fofe2 => 2,
            InputMode::Ngram(n) => n - 1,
        }
    }

    pub fn is_fofe(self) -> bool {
        matches!(self, InputMode::Fofe1 | InputMode::Fofe2)
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputMode::Fofe1 => f.write_str("fofe1"),
            InputMode::Fofe2 => f.write_str("fofe2"),
            InputMode::Ngram(n) => write!(f, "ngram{n}"),
        }
    }
}

impl FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fofe1" => Ok(InputMode::Fofe1),
            "fofe2" => Ok(InputMode::Fofe2),
            "bigram" => Ok(InputMode::Ngram(2)),
            "trigram" => Ok(InputMode::Ngram(3)),
            other => match other.strip_prefix("ngram").map(str::parse::<usize>) {
                Some(Ok(n)) if n >= 2 => Ok(InputMode::Ngram(n)),
                _ => Err(format!(
                    "unknown mode '{other}' (expected fofe1, fofe2, bigram, trigram or ngramN with N >= 2)"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_mode: InputMode,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Required by the FOFE modes, ignored by n-gram models.
    pub alpha: Option<ForgettingFactor>,
}

impl ModelConfig {
    pub fn new(
        input_mode: InputMode,
        vocab_size: usize,
        embed_dim: usize,
        hidden_dims: Vec<usize>,
        alpha: Option<ForgettingFactor>,
    ) -> Result<Self, NnlmError> {
        let config = ModelConfig {
            input_mode,
            vocab_size,
            embed_dim,
            hidden_dims,
            alpha,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), NnlmError> {
        let bad = |m: &str| Err(NnlmError::InvalidConfig(m.to_string()));
        if self.vocab_size == 0 || self.embed_dim == 0 {
            return bad("vocabulary size and embedding width must be positive");
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return bad("need at least one hidden layer, all of positive width");
        }
        match self.input_mode {
            InputMode::Ngram(n) if n < 2 => bad("n-gram order must be at least 2"),
            m if m.is_fofe() && self.alpha.is_none() => bad("FOFE modes need a forgetting factor"),
            _ => Ok(()),
        }
    }

    pub fn input_width(&self) -> usize {
        self.input_mode.slots() * self.embed_dim
    }

    /// `(fan_in, fan_out)` of every dense layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut width = self.input_width();
        for &h in &self.hidden_dims {
            shapes.push((width, h));
            width = h;
        }
        shapes.push((width, self.vocab_size));
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// Mini-batch size in words.
    pub batch_capacity_words: usize,
    pub seed: u64,
    /// Validation perplexity must drop by at least this much per epoch to keep
    /// the learning rate fixed.
    pub min_valid_ppl_gain: f64,
    /// Epochs run after the plateau, halving the rate before each.
    pub final_halving_epochs: usize,
    /// Hard stop on the total number of epochs.
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 0.4,
            batch_capacity_words: 200,
            seed: 42,
            min_valid_ppl_gain: 1.0,
            final_halving_epochs: 6,
            max_epochs: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, longest_sentence: usize) -> Result<(), NnlmError> {
        let bad = |m: String| Err(NnlmError::InvalidTrainConfig(m));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("initial learning rate must be positive, got {}", self.initial_lr));
        }
        if self.batch_capacity_words < longest_sentence.max(1) {
            return bad(format!(
                "batch capacity {} is smaller than the longest sentence ({longest_sentence} words)",
                self.batch_capacity_words
            ));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        Ok(())
    }
}
