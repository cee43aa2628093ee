use std::fmt;

use super::model::target_log_probs;
use super::{ModelConfig, ModelParams, NnlmError, Real};
use crate::corpus::TokenizedCorpus;

/// Sentences scored per forward call.
const EVAL_CHUNK_SENTENCES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityReport {
    pub name: String,
    pub tokens: usize,
    /// Total natural-log negative log-likelihood.
    pub nll: f64,
    pub ppl: f64,
}

impl PerplexityReport {
    pub fn from_log_probs(name: &str, log_probs: &[f64]) -> Result<Self, NnlmError> {
        if log_probs.is_empty() {
            return Err(NnlmError::EmptySplit(format!("{name} has no tokens")));
        }
        let nll = -log_probs.iter().sum::<f64>();
        Ok(PerplexityReport {
            name: name.to_string(),
            tokens: log_probs.len(),
            nll,
            ppl: (nll / log_probs.len() as f64).exp(),
        })
    }

    pub const TSV_HEADER: &'static str = "dataset\ttokens\tnll\tppl";

    pub fn tsv_row(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.name, self.tokens, self.nll, self.ppl)
    }
}

impl fmt::Display for PerplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} tokens, ppl {:.3}", self.name, self.tokens, self.ppl)
    }
}

/// Perplexity over every token of `corpus`, end-of-sentence markers included.
pub fn perplexity<F: Real>(
    params: &ModelParams<F>,
    config: &ModelConfig,
    corpus: &TokenizedCorpus,
    name: &str,
) -> Result<PerplexityReport, NnlmError> {
    if corpus.vocab_size() != config.vocab_size || params.vocab_size() != config.vocab_size {
        return Err(NnlmError::VocabMismatch {
            model: config.vocab_size,
            data: corpus.vocab_size(),
        });
    }
    let mut log_probs = Vec::new();
    for chunk in corpus.sentences().chunks(EVAL_CHUNK_SENTENCES) {
        log_probs.extend(target_log_probs(params, config, chunk)?);
    }
    PerplexityReport::from_log_probs(name, &log_probs)
}
