//! Seeded synthetic text with both local and sentence-wide structure.
//!
//! Every word belongs to one syntactic class. A sentence first draws a topic,
//! then a class sequence from a second-order Markov chain over classes, then
//! one word per class. Function classes use the same few words whatever the
//! topic; content classes draw from a word list owned by the (class, topic)
//! pair. Predicting a word well therefore needs the last two classes and the
//! topic, which is usually only visible several words back.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    /// Distinct word types; `w0000`, `w0001`, ...
    pub word_types: usize,
    pub topics: usize,
    pub function_classes: usize,
    pub content_classes: usize,
    pub words_per_function_class: usize,
    /// Successor classes allowed after each pair of classes.
    pub branching: usize,
    /// Per-word probability of ending the sentence once `min_len` is reached.
    pub stop_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub train_tokens: usize,
    pub valid_tokens: usize,
    pub test_tokens: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            word_types: 1998,
            topics: 8,
            function_classes: 4,
            content_classes: 8,
            words_per_function_class: 15,
            branching: 3,
            stop_prob: 0.05,
            min_len: 4,
            max_len: 50,
            train_tokens: 100_000,
            valid_tokens: 10_000,
            test_tokens: 10_000,
            seed: 42,
        }
    }
}

/// Train, validation and test text, one sentence per line.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpus {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

struct Grammar {
    /// `transitions[prev2 * (n + 1) + prev1]`, with class index `n` meaning
    /// "before the sentence".
    transitions: Vec<(Vec<usize>, WeightedIndex<f64>)>,
    /// Word lists per class (function) or per class and topic (content).
    function_words: Vec<Vec<String>>,
    content_words: Vec<Vec<Vec<String>>>,
    zipf: Vec<WeightedIndex<f64>>,
}

fn zipf_weights(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("n > 0")
}

impl Grammar {
    fn new(cfg: &ToyConfig, rng: &mut ChaCha8Rng) -> Self {
        let n = cfg.function_classes + cfg.content_classes;
        let mut transitions = Vec::with_capacity((n + 1) * (n + 1));
        for _ in 0..(n + 1) * (n + 1) {
            let mut classes: Vec<usize> = Vec::with_capacity(cfg.branching);
            while classes.len() < cfg.branching.min(n) {
                let c = rng.random_range(0..n);
                if !classes.contains(&c) {
                    classes.push(c);
                }
            }
            let weights: Vec<f64> = classes.iter().map(|_| 0.2 + rng.random::<f64>()).collect();
            transitions.push((classes, WeightedIndex::new(weights).expect("positive weights")));
        }

        let mut ids = (0..cfg.word_types).map(|i| format!("w{i:04}"));
        let function_words: Vec<Vec<String>> = (0..cfg.function_classes)
            .map(|_| ids.by_ref().take(cfg.words_per_function_class).collect())
            .collect();
        let rest: Vec<String> = ids.collect();
        let lists = cfg.content_classes * cfg.topics;
        let per_list = rest.len() / lists.max(1);
        let mut content_words = vec![Vec::with_capacity(cfg.topics); cfg.content_classes];
        for (i, chunk) in rest.chunks(per_list.max(1)).take(lists).enumerate() {
            content_words[i / cfg.topics].push(chunk.to_vec());
        }
        let mut zipf = vec![zipf_weights(1); per_list.max(cfg.words_per_function_class) + 1];
        for (len, z) in zipf.iter_mut().enumerate().skip(1) {
            *z = zipf_weights(len);
        }
        Grammar {
            transitions,
            function_words,
            content_words,
            zipf,
        }
    }

    fn sentence(&self, cfg: &ToyConfig, rng: &mut ChaCha8Rng) -> Vec<&str> {
        let n = cfg.function_classes + cfg.content_classes;
        let topic = rng.random_range(0..cfg.topics);
        let (mut prev2, mut prev1) = (n, n);
        let mut words = Vec::new();
        while words.len() < cfg.max_len {
            if words.len() >= cfg.min_len && rng.random::<f64>() < cfg.stop_prob {
                break;
            }
            let (classes, dist) = &self.transitions[prev2 * (n + 1) + prev1];
            let class = classes[dist.sample(rng)];
            let list = if class < cfg.function_classes {
                &self.function_words[class]
            } else {
                &self.content_words[class - cfg.function_classes][topic]
            };
            words.push(list[self.zipf[list.len()].sample(rng)].as_str());
            (prev2, prev1) = (prev1, class);
        }
        words
    }
}

fn split(grammar: &Grammar, cfg: &ToyConfig, tokens: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut lines = Vec::new();
    let mut count = 0;
    while count < tokens {
        let s = grammar.sentence(cfg, rng);
        // Each line also yields an end-of-sentence token.
        count += s.len() + 1;
        lines.push(s.join(" "));
    }
    lines
}

/// Generates the three splits; the same config always gives the same text.
pub fn generate(cfg: &ToyConfig) -> ToyCorpus {
    assert!(cfg.topics > 0 && cfg.function_classes + cfg.content_classes > 0);
    assert!(cfg.min_len >= 1 && cfg.min_len <= cfg.max_len);
    assert!(
        cfg.word_types >= cfg.function_classes * cfg.words_per_function_class + cfg.content_classes * cfg.topics,
        "not enough word types for the class lists"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grammar = Grammar::new(cfg, &mut rng);
    ToyCorpus {
        train: split(&grammar, cfg, cfg.train_tokens, &mut rng),
        valid: split(&grammar, cfg, cfg.valid_tokens, &mut rng),
        test: split(&grammar, cfg, cfg.test_tokens, &mut rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small() -> ToyConfig {
        ToyConfig {
            word_types: 200,
            train_tokens: 5_000,
            valid_tokens: 500,
            test_tokens: 500,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small()), generate(&small()));
        let other = ToyConfig { seed: 7, ..small() };
        assert_ne!(generate(&small()).train, generate(&other).train);
    }

    #[test]
    fn sizes_and_lengths() {
        let cfg = small();
        let c = generate(&cfg);
        let tokens: usize = c.train.iter().map(|l| l.split(' ').count() + 1).sum();
        assert!(tokens >= cfg.train_tokens && tokens < cfg.train_tokens + cfg.max_len + 1);
        for line in c.train.iter().chain(&c.valid).chain(&c.test) {
            let n = line.split(' ').count();
            assert!((cfg.min_len..=cfg.max_len).contains(&n), "{n}");
        }
    }

    #[test]
    fn words_come_from_the_declared_range() {
        let cfg = small();
        let c = generate(&cfg);
        let seen: HashSet<&str> = c.train.iter().flat_map(|l| l.split(' ')).collect();
        assert!(seen.iter().all(|w| w.len() == 5 && w[1..].parse::<usize>().unwrap() < cfg.word_types));
        assert!(seen.len() > 100);
    }
}
