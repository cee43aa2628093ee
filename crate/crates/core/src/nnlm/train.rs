use std::fmt::Write as _;

use super::{init_params, loss_and_grads, perplexity, ModelConfig, ModelParams, NnlmError, Real, TrainConfig};
use crate::corpus::{make_minibatches, TokenizedCorpus};

/// Learning-rate state: hold the initial rate while validation perplexity
/// keeps dropping by at least `min_gain` per epoch, then run a fixed number
/// of further epochs, halving the rate before each.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    lr: f64,
    min_gain: f64,
    halving_epochs: usize,
    halving: Option<usize>,
    last_ppl: f64,
}

impl LrSchedule {
    /// `initial_ppl` is the validation perplexity before any training, the
    /// reference for the first epoch's gain.
    pub fn new(initial_lr: f64, min_gain: f64, halving_epochs: usize, initial_ppl: f64) -> Self {
        LrSchedule {
            lr: initial_lr,
            min_gain,
            halving_epochs,
            halving: None,
            last_ppl: initial_ppl,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn in_halving_phase(&self) -> bool {
        self.halving.is_some()
    }

    /// Records the validation perplexity after an epoch. Returns the rate for
    /// the next epoch, or `None` when training is over.
    pub fn observe(&mut self, valid_ppl: f64) -> Option<f64> {
        let gain = self.last_ppl - valid_ppl;
        self.last_ppl = valid_ppl;
        let remaining = match self.halving {
            Some(r) => r,
            None if gain >= self.min_gain => return Some(self.lr),
            None => self.halving_epochs,
        };
        if remaining == 0 {
            self.halving = Some(0);
            return None;
        }
        self.lr /= 2.0;
        self.halving = Some(remaining - 1);
        Some(self.lr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Token-weighted mean NLL over the epoch's batches.
    pub train_nll: f64,
    pub valid_ppl: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub initial_valid_ppl: f64,
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub const TSV_HEADER: &'static str = "epoch\tlr\ttrain_nll\tvalid_ppl";

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::TSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            writeln!(out, "{}\t{}\t{}\t{}", e.epoch, e.lr, e.train_nll, e.valid_ppl).unwrap();
        }
        out
    }

    pub fn final_valid_ppl(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.valid_ppl)
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains from a fresh initialization seeded by `train_config.seed`.
pub fn train<F: Real>(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    train_split: &TokenizedCorpus,
    valid_split: &TokenizedCorpus,
) -> Result<(ModelParams<F>, TrainLog), NnlmError> {
    model_config.validate()?;
    for (name, split) in [("train", train_split), ("valid", valid_split)] {
        if split.is_empty() || split.sentences().iter().all(|s| s.is_empty()) {
            return Err(NnlmError::EmptySplit(format!("{name} split has no tokens")));
        }
        if split.vocab_size() != model_config.vocab_size {
            return Err(NnlmError::VocabMismatch {
                model: model_config.vocab_size,
                data: split.vocab_size(),
            });
        }
    }
    let longest = train_split.sentences().iter().map(|s| s.len()).max().unwrap_or(0);
    train_config.validate(longest)?;

    let limit = 10.0 * model_config.vocab_size as f64;
    let mut params = init_params::<F>(model_config, train_config.seed);
    let initial_ppl = perplexity(&params, model_config, valid_split, "valid")?.ppl;
    let mut schedule = LrSchedule::new(
        train_config.initial_lr,
        train_config.min_valid_ppl_gain,
        train_config.final_halving_epochs,
        initial_ppl,
    );
    let mut log = TrainLog {
        initial_valid_ppl: initial_ppl,
        epochs: Vec::new(),
    };

    for epoch in 1..=train_config.max_epochs {
        let lr = schedule.lr();
        let batches = make_minibatches(
            train_split.sentences(),
            train_config.batch_capacity_words,
            epoch_seed(train_config.seed, epoch),
        );
        let mut nll_sum = 0.0;
        let mut tokens = 0usize;
        for batch in &batches {
            let n: usize = batch.iter().map(|s| s.len()).sum();
            if n == 0 {
                continue;
            }
            let (loss, grads) = loss_and_grads(&params, model_config, batch)?;
            params.sgd_step(&grads, F::from_f64(lr))?;
            nll_sum += loss * n as f64;
            tokens += n;
        }
        let valid_ppl = perplexity(&params, model_config, valid_split, "valid")?.ppl;
        log.epochs.push(EpochLog {
            epoch,
            lr,
            train_nll: nll_sum / tokens.max(1) as f64,
            valid_ppl,
        });
        if valid_ppl.is_nan() || valid_ppl > limit {
            return Err(NnlmError::Diverged {
                epoch,
                ppl: valid_ppl,
                limit,
            });
        }
        if schedule.observe(valid_ppl).is_none() {
            break;
        }
    }
    Ok((params, log))
}
