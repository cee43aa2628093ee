//! Text ingestion: frequency-capped vocabulary, whitespace tokenization and
//! sentence-packed mini-batches.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encoding::TokenSequence;

pub const UNK: &str = "<unk>";
pub const EOS: &str = "</s>";
pub const UNK_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const RESERVED: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("vocabulary cap must be at least 2 (the reserved tokens), got {0}")]
    CapTooSmall(usize),
    #[error("no tokens in input")]
    EmptyInput,
    #[error("vocabulary file line {line}: {reason}")]
    BadVocabFile { line: usize, reason: String },
}

/// Token/id bijection with `<unk>` at id 0 and `</s>` at id 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
    cap: usize,
}

impl Vocabulary {
    /// Keeps the `cap - 2` most frequent words, ties broken by first occurrence.
    pub fn build<S: AsRef<str>>(lines: &[S], cap: usize) -> Result<Self, CorpusError> {
        if cap < RESERVED {
            return Err(CorpusError::CapTooSmall(cap));
        }
        let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
        let mut sentences = 0u64;
        let mut unk_literal = 0u64;
        let mut order = 0usize;
        for line in lines {
            let mut any = false;
            for word in line.as_ref().split_whitespace() {
                any = true;
                match word {
                    UNK => unk_literal += 1,
                    EOS => {}
                    w => {
                        let entry = counts.entry(w).or_insert((0, order));
                        if entry.0 == 0 {
                            order += 1;
                        }
                        entry.0 += 1;
                    }
                }
            }
            if any {
                sentences += 1;
            }
        }
        if sentences == 0 {
            return Err(CorpusError::EmptyInput);
        }
        let mut ranked: Vec<(&str, u64, usize)> =
            counts.into_iter().map(|(w, (c, first))| (w, c, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

        let keep = cap - RESERVED;
        let dropped: u64 = ranked.iter().skip(keep).map(|r| r.1).sum();
        let mut tokens = vec![UNK.to_string(), EOS.to_string()];
        let mut frequencies = vec![unk_literal + dropped, sentences];
        for (w, c, _) in ranked.into_iter().take(keep) {
            tokens.push(w.to_string());
            frequencies.push(c);
        }
        Ok(Self::from_parts(tokens, frequencies, cap))
    }

    fn from_parts(tokens: Vec<String>, frequencies: Vec<u64>, cap: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            frequencies,
            index,
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or `<unk>`.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequencies[id]
    }

    /// `id  token  frequency`, with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\ttoken\tfrequency\n");
        for (i, (t, f)) in self.tokens.iter().zip(&self.frequencies).enumerate() {
            writeln!(out, "{i}\t{t}\t{f}").unwrap();
        }
        out
    }

    /// Parses [`Vocabulary::to_tsv`] output. The reserved tokens must sit at
    /// their fixed ids.
    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let (tokens, frequencies) = parse_token_table(text)?;
        if tokens.len() < RESERVED || tokens[UNK_ID] != UNK || tokens[EOS_ID] != EOS {
            return Err(CorpusError::BadVocabFile {
                line: 0,
                reason: format!("ids 0 and 1 must be {UNK} and {EOS}"),
            });
        }
        let cap = tokens.len();
        Ok(Self::from_parts(tokens, frequencies, cap))
    }
}

/// Reads a `id  token  [frequency]` table with contiguous ids from 0. A first
/// line starting with `id` is taken as a header. Used for plain symbol tables
/// that carry no reserved tokens.
pub fn parse_token_table(text: &str) -> Result<(Vec<String>, Vec<u64>), CorpusError> {
    let mut tokens = Vec::new();
    let mut frequencies = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || (n == 0 && line.starts_with("id\t")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |reason: String| CorpusError::BadVocabFile {
            line: line_no,
            reason,
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(bad(format!("expected 2 or 3 tab-separated fields, got {}", fields.len())));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad id '{}'", fields[0])))?;
        if id != tokens.len() {
            return Err(bad(format!("id {id} out of sequence, expected {}", tokens.len())));
        }
        let token = fields[1].to_string();
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(bad(format!("bad token '{token}'")));
        }
        if !seen.insert(token.clone()) {
            return Err(bad(format!("duplicate token '{token}'")));
        }
        let freq = match fields.get(2) {
            Some(f) => f.parse().map_err(|_| bad(format!("bad frequency '{f}'")))?,
            None => 0,
        };
        tokens.push(token);
        frequencies.push(freq);
    }
    if tokens.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    Ok((tokens, frequencies))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorpusStats {
    /// All ids, end-of-sentence markers included.
    pub tokens: u64,
    pub unk_tokens: u64,
}

impl CorpusStats {
    pub fn oov_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.unk_tokens as f64 / self.tokens as f64
        }
    }
}

/// Sentences as id sequences, each terminated by `</s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    sentences: Vec<TokenSequence>,
    vocab_size: usize,
    stats: CorpusStats,
}

impl TokenizedCorpus {
    /// Wraps already-tokenized sentences; all must be non-empty and share a vocabulary size.
    pub fn from_sentences(sentences: Vec<TokenSequence>, vocab_size: usize) -> Self {
        assert!(sentences.iter().all(|s| !s.is_empty() && s.vocab_size() == vocab_size));
        let tokens = sentences.iter().map(|s| s.len() as u64).sum();
        let unk_tokens = sentences
            .iter()
            .flat_map(|s| s.ids())
            .filter(|&&id| id == UNK_ID)
            .count() as u64;
        TokenizedCorpus {
            sentences,
            vocab_size,
            stats: CorpusStats { tokens, unk_tokens },
        }
    }

    pub fn sentences(&self) -> &[TokenSequence] {
        &self.sentences
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// One sentence per non-blank line, split on whitespace, unknown words
/// mapped to `<unk>`, `</s>` appended.
pub fn tokenize<S: AsRef<str>>(lines: &[S], vocab: &Vocabulary) -> TokenizedCorpus {
    let sentences = lines
        .iter()
        .filter_map(|line| {
            let mut ids: Vec<usize> = line
                .as_ref()
                .split_whitespace()
                .map(|w| vocab.id_or_unk(w))
                .collect();
            if ids.is_empty() {
                return None;
            }
            ids.push(EOS_ID);
            Some(TokenSequence::new(ids, vocab.len()).expect("ids come from the vocabulary"))
        })
        .collect();
    TokenizedCorpus::from_sentences(sentences, vocab.len())
}

/// Sentences (possibly truncated) making up one mini-batch.
pub type Batch = Vec<TokenSequence>;

/// Shuffles sentences with a seeded generator and packs them greedily into
/// batches of at most `capacity` tokens. A sentence that does not fit in the
/// space left is cut to fill the batch; its remainder is dropped.
pub fn make_minibatches(corpus: &[TokenSequence], capacity: usize, seed: u64) -> Vec<Batch> {
    assert!(capacity >= 1, "batch capacity must be positive");
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut batches = Vec::new();
    let mut current: Batch = Vec::new();
    let mut used = 0;
    for i in order {
        let sentence = &corpus[i];
        let room = capacity - used;
        if sentence.len() <= room {
            used += sentence.len();
            current.push(sentence.clone());
        } else {
            current.push(sentence.truncated(room));
            used = capacity;
        }
        if used == capacity {
            batches.push(std::mem::take(&mut current));
            used = 0;
        }
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}
