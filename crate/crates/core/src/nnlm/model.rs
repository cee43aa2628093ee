use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use super::{InputMode, ModelConfig, ModelParams, NnlmError, Real};
use crate::encoding::{encode_embedded, TokenSequence};

fn check_sentences(sentences: &[TokenSequence], config: &ModelConfig) -> Result<(), NnlmError> {
    for s in sentences {
        if s.vocab_size() != config.vocab_size {
            return Err(NnlmError::VocabMismatch {
                model: config.vocab_size,
                data: s.vocab_size(),
            });
        }
    }
    Ok(())
}

fn check_embedding<F>(embedding: &ArrayView2<'_, F>, config: &ModelConfig) -> Result<(), NnlmError> {
    if embedding.dim() != (config.vocab_size, config.embed_dim) {
        return Err(NnlmError::InvalidConfig(format!(
            "embedding is {:?}, config wants ({}, {})",
            embedding.dim(),
            config.vocab_size,
            config.embed_dim
        )));
    }
    Ok(())
}

/// One training pair per token: the input built from the tokens before it in
/// its sentence, and the token itself as target. Slots are ordered most
/// recent first; history before the sentence start is zero.
pub fn build_inputs<F: Real>(
    sentences: &[TokenSequence],
    config: &ModelConfig,
    embedding: ArrayView2<'_, F>,
) -> Result<(Array2<F>, Vec<usize>), NnlmError> {
    check_sentences(sentences, config)?;
    check_embedding(&embedding, config)?;
    let d = config.embed_dim;
    let slots = config.input_mode.slots();
    let total: usize = sentences.iter().map(TokenSequence::len).sum();
    let mut inputs = Array2::<F>::zeros((total, slots * d));
    let mut targets = Vec::with_capacity(total);
    let mut row = 0;
    for sentence in sentences {
        let ids = sentence.ids();
        match config.input_mode {
            InputMode::Fofe1 | InputMode::Fofe2 => {
                let alpha = config.alpha.expect("validated config");
                let prefixes = encode_embedded(sentence, alpha, embedding)
                    .expect("shapes checked above");
                for t in 0..ids.len() {
                    for slot in 0..slots.min(t) {
                        inputs
                            .slice_mut(s![row + t, slot * d..(slot + 1) * d])
                            .assign(&prefixes.row(t - slot - 1));
                    }
                }
            }
            InputMode::Ngram(_) => {
                for t in 0..ids.len() {
                    for slot in 0..slots.min(t) {
                        inputs
                            .slice_mut(s![row + t, slot * d..(slot + 1) * d])
                            .assign(&embedding.row(ids[t - slot - 1]));
                    }
                }
            }
        }
        targets.extend_from_slice(ids);
        row += ids.len();
    }
    Ok((inputs, targets))
}

/// Scatters the gradient on the input rows back onto the embedding.
fn accumulate_embedding_grad<F: Real>(
    sentences: &[TokenSequence],
    config: &ModelConfig,
    input_grad: ArrayView2<'_, F>,
    embedding_grad: &mut Array2<F>,
) {
    let d = config.embed_dim;
    let slots = config.input_mode.slots();
    let mut row = 0;
    for sentence in sentences {
        let ids = sentence.ids();
        match config.input_mode {
            InputMode::Fofe1 | InputMode::Fofe2 => {
                let alpha = F::from_f64(config.alpha.expect("validated config").value());
                // Gradient on each decayed prefix row, then the transposed
                // recursion: g_k = dE_k + alpha * g_{k+1}, and g_k lands on U[w_k].
                let mut prefix_grad = Array2::<F>::zeros((ids.len(), d));
                for t in 0..ids.len() {
                    for slot in 0..slots.min(t) {
                        let mut target = prefix_grad.row_mut(t - slot - 1);
                        target += &input_grad.slice(s![row + t, slot * d..(slot + 1) * d]);
                    }
                }
                let mut carry = Array1::<F>::zeros(d);
                for k in (0..ids.len()).rev() {
                    Zip::from(&mut carry)
                        .and(prefix_grad.row(k))
                        .for_each(|c, &g| *c = g + alpha * *c);
                    let mut target = embedding_grad.row_mut(ids[k]);
                    target += &carry;
                }
            }
            InputMode::Ngram(_) => {
                for t in 0..ids.len() {
                    for slot in 0..slots.min(t) {
                        let mut target = embedding_grad.row_mut(ids[t - slot - 1]);
                        target += &input_grad.slice(s![row + t, slot * d..(slot + 1) * d]);
                    }
                }
            }
        }
        row += ids.len();
    }
}

fn ensure_finite<F: Real>(a: &Array2<F>, layer: usize) -> Result<(), NnlmError> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NnlmError::NonFinite { layer })
    }
}

/// Hidden activations (input first) and output logits.
fn run_layers<F: Real>(
    params: &ModelParams<F>,
    inputs: Array2<F>,
) -> Result<(Vec<Array2<F>>, Array2<F>), NnlmError> {
    let expected = params
        .hidden
        .first()
        .map_or(params.output.weight.nrows(), |l| l.weight.nrows());
    if inputs.ncols() != expected {
        return Err(NnlmError::InputWidth {
            expected,
            found: inputs.ncols(),
        });
    }
    let mut activations = vec![inputs];
    for (layer, dense) in params.hidden.iter().enumerate() {
        let mut z = activations.last().unwrap().dot(&dense.weight);
        z += &dense.bias;
        z.mapv_inplace(|x| x.max(F::zero()));
        ensure_finite(&z, layer)?;
        activations.push(z);
    }
    let mut logits = activations.last().unwrap().dot(&params.output.weight);
    logits += &params.output.bias;
    ensure_finite(&logits, params.hidden.len())?;
    Ok((activations, logits))
}

/// Pre-softmax scores for explicit input rows.
pub fn logits<F: Real>(params: &ModelParams<F>, inputs: ArrayView2<'_, F>) -> Result<Array2<F>, NnlmError> {
    run_layers(params, inputs.to_owned()).map(|(_, l)| l)
}

/// Next-token distributions for explicit input rows.
pub fn forward<F: Real>(params: &ModelParams<F>, inputs: ArrayView2<'_, F>) -> Result<Array2<F>, NnlmError> {
    let mut out = logits(params, inputs)?;
    softmax_rows(&mut out);
    Ok(out)
}

/// In-place softmax; returns each row's log normalizer `max + ln(sum exp(x - max))`.
fn softmax_rows<F: Real>(a: &mut Array2<F>) -> Vec<f64> {
    let mut log_norms = Vec::with_capacity(a.nrows());
    for mut row in a.rows_mut() {
        let max = row.iter().fold(F::neg_infinity(), |m, &x| m.max(x));
        let mut sum = 0.0f64;
        row.mapv_inplace(|x| {
            let e = (x - max).exp();
            sum += e.to_f64();
            e
        });
        let inv = F::from_f64(1.0 / sum);
        row.mapv_inplace(|x| x * inv);
        log_norms.push(max.to_f64() + sum.ln());
    }
    log_norms
}

/// Natural-log probability of each target token, in corpus order.
pub(crate) fn target_log_probs<F: Real>(
    params: &ModelParams<F>,
    config: &ModelConfig,
    sentences: &[TokenSequence],
) -> Result<Vec<f64>, NnlmError> {
    let (inputs, targets) = build_inputs(sentences, config, params.embedding.view())?;
    let (_, mut logits) = run_layers(params, inputs)?;
    let raw: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| logits[[i, t]].to_f64())
        .collect();
    let log_norms = softmax_rows(&mut logits);
    Ok(raw.iter().zip(log_norms).map(|(x, z)| x - z).collect())
}

/// Mean negative log-likelihood over every token of `sentences`, and the
/// gradient of that mean with respect to every parameter tensor.
pub fn loss_and_grads<F: Real>(
    params: &ModelParams<F>,
    config: &ModelConfig,
    sentences: &[TokenSequence],
) -> Result<(f64, ModelParams<F>), NnlmError> {
    let (inputs, targets) = build_inputs(sentences, config, params.embedding.view())?;
    let n = targets.len();
    if n == 0 {
        return Err(NnlmError::EmptySplit("batch has no tokens".into()));
    }
    let (activations, mut delta) = run_layers(params, inputs)?;

    let raw: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| delta[[i, t]].to_f64())
        .collect();
    let log_norms = softmax_rows(&mut delta);
    let nll: f64 = raw.iter().zip(&log_norms).map(|(x, z)| z - x).sum::<f64>() / n as f64;

    // d(mean NLL)/d(logits) = (softmax - onehot) / n
    for (i, &t) in targets.iter().enumerate() {
        delta[[i, t]] = delta[[i, t]] - F::one();
    }
    delta.mapv_inplace(|x| x * F::from_f64(1.0 / n as f64));

    let mut grads = ModelParams::<F>::zeros(config);
    let last = activations.last().unwrap();
    grads.output.weight = last.t().dot(&delta);
    grads.output.bias = delta.sum_axis(Axis(0));
    let mut delta = delta.dot(&params.output.weight.t());

    for (layer, dense) in params.hidden.iter().enumerate().rev() {
        // activations[layer + 1] is the ReLU output of this layer.
        Zip::from(&mut delta)
            .and(&activations[layer + 1])
            .for_each(|g, &h| {
                if h <= F::zero() {
                    *g = F::zero();
                }
            });
        grads.hidden[layer].weight = activations[layer].t().dot(&delta);
        grads.hidden[layer].bias = delta.sum_axis(Axis(0));
        delta = delta.dot(&dense.weight.t());
    }

    accumulate_embedding_grad(sentences, config, delta.view(), &mut grads.embedding);
    Ok((nll, grads))
}
