//! Fixed-size ordinally-forgetting encoding.
//!
//! A token sequence `w_1 .. w_T` over a vocabulary of `K` symbols is mapped to
//! a `K`-dimensional code by the recursion `z_t = alpha * z_{t-1} + e_{w_t}`
//! with `z_0 = 0`, where `e_i` is the one-hot vector of token `i`. Entry `i` of
//! the final code is therefore `sum over {t : w_t = i} of alpha^(T - t)`.
//!
//! Three evaluation routes are provided and are expected to agree to rounding:
//!
//! * [`encode_prefixes`]: the recursion, kept sparse (a prefix of length `t`
//!   touches at most `t` entries, so large vocabularies cost nothing).
//! * [`encode_via_matrix`]: the product `S = M V` with the lower-triangular
//!   [`ForgettingMatrix`] `M`.
//! * [`encode_batch`]: the block-diagonal product over a mini-batch, evaluated
//!   block by block so state never crosses a sentence boundary.
//!
//! [`encode_embedded`] applies the same decay to embedding rows, giving
//! `M (V U)` without ever materializing a `K`-dimensional code.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use num_traits::Float;

use crate::error::{DecodeError, FofeError};

/// Default absolute tolerance for [`decode`].
pub const DEFAULT_DECODE_TOL: f64 = 1e-9;

/// Upper bound on search nodes visited by [`decode`] before it gives up and
/// reports an ambiguity.
const DECODE_NODE_BUDGET: usize = 1_000_000;

/// Which uniqueness guarantee holds for a forgetting factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `alpha <= 0.5`: every code decodes to exactly one sequence.
    Unique,
    /// `0.5 < alpha < 1`: unique except at finitely many critical values.
    AlmostUnique,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Unique => "unique",
            Regime::AlmostUnique => "almost-unique",
        }
    }
}

/// A forgetting factor `alpha` in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ForgettingFactor(f64);

impl ForgettingFactor {
    pub fn new(value: f64) -> Result<Self, FofeError> {
        if value > 0.0 && value < 1.0 {
            Ok(ForgettingFactor(value))
        } else {
            Err(FofeError::InvalidAlpha(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn regime(self) -> Regime {
        if self.0 <= 0.5 {
            Regime::Unique
        } else {
            Regime::AlmostUnique
        }
    }

    /// Supremum of any code entry, `1 / (1 - alpha)`.
    pub fn entry_bound(self) -> f64 {
        1.0 / (1.0 - self.0)
    }
}

impl std::fmt::Display for ForgettingFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::str::FromStr for ForgettingFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("'{s}' is not a number"))?;
        ForgettingFactor::new(value).map_err(|e| e.to_string())
    }
}

/// Token ids drawn from a vocabulary of `vocab_size` symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    ids: Vec<usize>,
    vocab_size: usize,
}

impl TokenSequence {
    pub fn new(ids: Vec<usize>, vocab_size: usize) -> Result<Self, FofeError> {
        if vocab_size == 0 {
            return Err(FofeError::EmptyVocabulary);
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= vocab_size) {
            return Err(FofeError::TokenOutOfRange { id, vocab_size });
        }
        Ok(TokenSequence { ids, vocab_size })
    }

    pub fn empty(vocab_size: usize) -> Result<Self, FofeError> {
        Self::new(Vec::new(), vocab_size)
    }

    #[inline]
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// The first `len` tokens (or the whole sequence if shorter).
    pub fn truncated(&self, len: usize) -> TokenSequence {
        TokenSequence {
            ids: self.ids[..len.min(self.ids.len())].to_vec(),
            vocab_size: self.vocab_size,
        }
    }
}

/// A code stored as `(token id, value)` pairs sorted by id, zero entries omitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCode(Vec<(usize, f64)>);

impl SparseCode {
    /// Wraps `(id, value)` pairs that are already sorted by strictly increasing id.
    pub fn from_sorted(entries: Vec<(usize, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseCode(entries)
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn nnz(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, id: usize) -> f64 {
        match self.0.binary_search_by_key(&id, |&(i, _)| i) {
            Ok(pos) => self.0[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, vocab_size: usize) -> Vec<f64> {
        let mut dense = vec![0.0; vocab_size];
        for &(id, v) in &self.0 {
            dense[id] = v;
        }
        dense
    }

    /// `alpha * self + e_id`, i.e. one step of the recursion.
    fn decayed_plus_one_hot(&self, alpha: f64, id: usize) -> SparseCode {
        let mut next: Vec<(usize, f64)> = Vec::with_capacity(self.0.len() + 1);
        let mut inserted = false;
        for &(i, v) in &self.0 {
            if !inserted && id < i {
                next.push((id, 1.0));
                inserted = true;
            }
            if i == id {
                next.push((i, alpha * v + 1.0));
                inserted = true;
            } else {
                next.push((i, alpha * v));
            }
        }
        if !inserted {
            next.push((id, 1.0));
        }
        SparseCode(next)
    }

    /// Max-norm distance between two sparse codes.
    pub fn max_abs_diff(&self, other: &SparseCode) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut worst = 0.0f64;
        while i < a.len() || j < b.len() {
            let d = match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                    i += 1;
                    j += 1;
                    va - vb
                }
                (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                    i += 1;
                    va
                }
                (Some(_), Some(&(_, vb))) => {
                    j += 1;
                    vb
                }
                (Some(&(_, va)), None) => {
                    i += 1;
                    va
                }
                (None, Some(&(_, vb))) => {
                    j += 1;
                    vb
                }
                (None, None) => unreachable!(),
            };
            worst = worst.max(d.abs());
        }
        worst
    }
}

/// The fixed-size code of a whole sequence, dense over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FofeCode {
    entries: Vec<f64>,
    alpha: ForgettingFactor,
}

impl FofeCode {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn alpha(&self) -> ForgettingFactor {
        self.alpha
    }

    pub fn vocab_size(&self) -> usize {
        self.entries.len()
    }

    pub fn decode(&self, max_len: usize, tol: f64) -> Result<TokenSequence, DecodeError> {
        decode(&self.entries, self.alpha, max_len, tol)
    }
}

/// Codes of every prefix `w_1..w_t`, `t = 1..=T`. Row `t - 1` holds prefix `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixCodes {
    vocab_size: usize,
    alpha: ForgettingFactor,
    rows: Vec<SparseCode>,
}

impl PrefixCodes {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn alpha(&self) -> ForgettingFactor {
        self.alpha
    }

    pub fn sparse_rows(&self) -> &[SparseCode] {
        &self.rows
    }

    /// Dense view of row `index` (0-based; row 0 is the one-token prefix).
    pub fn row(&self, index: usize) -> Vec<f64> {
        self.rows[index].to_dense(self.vocab_size)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows.len()).map(|t| self.row(t)).collect()
    }

    /// Code of the full sequence; the zero vector for an empty sequence.
    pub fn final_code(&self) -> FofeCode {
        let entries = match self.rows.last() {
            Some(row) => row.to_dense(self.vocab_size),
            None => vec![0.0; self.vocab_size],
        };
        FofeCode {
            entries,
            alpha: self.alpha,
        }
    }

    /// Largest elementwise difference against another set of prefix codes.
    /// Returns infinity if the shapes differ.
    pub fn max_abs_diff(&self, other: &PrefixCodes) -> f64 {
        if self.rows.len() != other.rows.len() || self.vocab_size != other.vocab_size {
            return f64::INFINITY;
        }
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Codes of every prefix, by the recursion `z_t = alpha * z_{t-1} + e_{w_t}`.
pub fn encode_prefixes(seq: &TokenSequence, alpha: ForgettingFactor) -> PrefixCodes {
    let a = alpha.value();
    let mut rows = Vec::with_capacity(seq.len());
    let mut current = SparseCode::default();
    for &id in seq.ids() {
        current = current.decayed_plus_one_hot(a, id);
        rows.push(current.clone());
    }
    PrefixCodes {
        vocab_size: seq.vocab_size(),
        alpha,
        rows,
    }
}

/// Code of the full sequence.
pub fn encode(seq: &TokenSequence, alpha: ForgettingFactor) -> FofeCode {
    let a = alpha.value();
    let mut entries = vec![0.0; seq.vocab_size()];
    for &id in seq.ids() {
        for v in entries.iter_mut() {
            *v *= a;
        }
        entries[id] += 1.0;
    }
    FofeCode { entries, alpha }
}

/// Lower-triangular `T x T` matrix with `entry(i, j) = alpha^(i - j)` for `i >= j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingMatrix {
    alpha: ForgettingFactor,
    entries: Array2<f64>,
}

impl ForgettingMatrix {
    pub fn new(order: usize, alpha: ForgettingFactor) -> Result<Self, FofeError> {
        if order == 0 {
            return Err(FofeError::ZeroOrder);
        }
        // powers[k] = alpha * powers[k - 1], so column recursion holds bit for bit.
        let mut powers = vec![1.0; order];
        for k in 1..order {
            powers[k] = powers[k - 1] * alpha.value();
        }
        let entries =
            Array2::from_shape_fn((order, order), |(i, j)| if i >= j { powers[i - j] } else { 0.0 });
        Ok(ForgettingMatrix { alpha, entries })
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn alpha(&self) -> ForgettingFactor {
        self.alpha
    }

    /// Entry at 0-based `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    /// Dense product `M V` for a `T x D` right-hand side.
    pub fn apply<F: Float + 'static>(&self, rhs: ArrayView2<'_, F>) -> Array2<F> {
        assert_eq!(rhs.nrows(), self.order(), "row count must equal matrix order");
        let mut out = Array2::<F>::zeros((self.order(), rhs.ncols()));
        for i in 0..self.order() {
            for j in 0..=i {
                let m = F::from(self.entries[[i, j]]).unwrap();
                for (o, &v) in out.row_mut(i).iter_mut().zip(rhs.row(j).iter()) {
                    *o = *o + m * v;
                }
            }
        }
        out
    }
}

/// Codes of every prefix as `S = M V`, where `V` stacks the one-hot rows.
pub fn encode_via_matrix(
    seq: &TokenSequence,
    alpha: ForgettingFactor,
) -> Result<PrefixCodes, FofeError> {
    if seq.is_empty() {
        return Err(FofeError::EmptySequence);
    }
    let m = ForgettingMatrix::new(seq.len(), alpha)?;
    let ids = seq.ids();
    let rows = (0..ids.len())
        .map(|i| {
            // Row i of M V: sum over j <= i of M[i, j] * e_{w_j}; V is one-hot so
            // each term lands on a single column.
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (j, &id) in ids.iter().enumerate().take(i + 1) {
                *acc.entry(id).or_insert(0.0) += m.entry(i, j);
            }
            SparseCode(acc.into_iter().collect())
        })
        .collect();
    Ok(PrefixCodes {
        vocab_size: seq.vocab_size(),
        alpha,
        rows,
    })
}

/// Block-diagonal `S = diag(M_1..M_N) [V_1; ..; V_N]`, one block per sentence.
pub fn encode_batch(
    sentences: &[TokenSequence],
    alpha: ForgettingFactor,
) -> Result<Vec<PrefixCodes>, FofeError> {
    let Some(first) = sentences.first() else {
        return Ok(Vec::new());
    };
    let vocab_size = first.vocab_size();
    for (index, s) in sentences.iter().enumerate() {
        if s.is_empty() {
            return Err(FofeError::EmptySentenceInBatch { index });
        }
        if s.vocab_size() != vocab_size {
            return Err(FofeError::VocabMismatch {
                index,
                expected: vocab_size,
                found: s.vocab_size(),
            });
        }
    }
    sentences
        .iter()
        .map(|s| encode_via_matrix(s, alpha))
        .collect()
}

/// Row `t` is the code of prefix `t + 1` projected through `embedding`,
/// computed as `M (V U)`: look up embedding rows, then decay them recursively.
pub fn encode_embedded<F: Float + 'static>(
    seq: &TokenSequence,
    alpha: ForgettingFactor,
    embedding: ArrayView2<'_, F>,
) -> Result<Array2<F>, FofeError> {
    if embedding.nrows() != seq.vocab_size() {
        return Err(FofeError::EmbeddingShape {
            rows: embedding.nrows(),
            vocab_size: seq.vocab_size(),
        });
    }
    let a = F::from(alpha.value()).unwrap();
    let mut out = Array2::<F>::zeros((seq.len(), embedding.ncols()));
    for (t, &id) in seq.ids().iter().enumerate() {
        let emb = embedding.row(id);
        if t == 0 {
            out.row_mut(0).assign(&emb);
        } else {
            let (done, mut rest) = out.view_mut().split_at(ndarray::Axis(0), t);
            let prev = done.row(t - 1);
            for ((o, &p), &e) in rest.row_mut(0).iter_mut().zip(prev.iter()).zip(emb.iter()) {
                *o = a * p + e;
            }
        }
    }
    Ok(out)
}

/// Recovers the sequence whose code is `code`.
///
/// Works from the most recent token backwards: at lag `k` the token must be
/// an entry whose residual still holds `alpha^k`. For `alpha <= 0.5` exactly one
/// entry qualifies at every lag. Above 0.5 several may qualify; the search
/// then branches and reports [`DecodeError::Ambiguous`] if more than one
/// sequence reproduces the code.
pub fn decode(
    code: &[f64],
    alpha: ForgettingFactor,
    max_len: usize,
    tol: f64,
) -> Result<TokenSequence, DecodeError> {
    let vocab_size = code.len();
    if vocab_size == 0 {
        return Err(DecodeError::Malformed {
            reason: "empty code vector".into(),
        });
    }
    if let Some(v) = code.iter().find(|v| !v.is_finite() || **v < -tol) {
        return Err(DecodeError::Malformed {
            reason: format!("entry {v} is negative or not finite"),
        });
    }

    let mut search = DecodeSearch {
        code,
        alpha: alpha.value(),
        max_len,
        tol,
        residual: code.to_vec(),
        reversed: Vec::new(),
        solutions: Vec::new(),
        nodes: 0,
        hit_max_len: false,
        first_branch: None,
    };
    search.visit(1.0);

    match search.solutions.len() {
        1 if search.nodes <= DECODE_NODE_BUDGET => {
            let ids = search.solutions.pop().unwrap();
            Ok(TokenSequence { ids, vocab_size })
        }
        0 if search.nodes <= DECODE_NODE_BUDGET => {
            if search.hit_max_len {
                Err(DecodeError::TooLong { max_len })
            } else {
                Err(DecodeError::Malformed {
                    reason: "no token sequence reproduces the code within tolerance".into(),
                })
            }
        }
        _ => {
            let (lag, candidates) = search.first_branch.unwrap_or((0, search.solutions.len()));
            Err(DecodeError::Ambiguous { lag, candidates })
        }
    }
}

struct DecodeSearch<'a> {
    code: &'a [f64],
    alpha: f64,
    max_len: usize,
    tol: f64,
    residual: Vec<f64>,
    /// Tokens found so far, most recent first.
    reversed: Vec<usize>,
    solutions: Vec<Vec<usize>>,
    nodes: usize,
    hit_max_len: bool,
    first_branch: Option<(usize, usize)>,
}

impl DecodeSearch<'_> {
    fn done(&self) -> bool {
        self.solutions.len() > 1 || self.nodes > DECODE_NODE_BUDGET
    }

    /// `power` is `alpha^lag` with `lag = self.reversed.len()`.
    fn visit(&mut self, power: f64) {
        self.nodes += 1;
        if self.done() {
            return;
        }
        let lag = self.reversed.len();
        if self.residual.iter().all(|r| r.abs() <= self.tol) {
            let ids: Vec<usize> = self.reversed.iter().rev().copied().collect();
            if self.reencodes(&ids) {
                self.solutions.push(ids);
            }
            return;
        }
        if lag >= self.max_len {
            self.hit_max_len = true;
            return;
        }
        // Below this power the residual can no longer be told apart from noise.
        if power <= 2.0 * self.tol {
            return;
        }
        let candidates: Vec<usize> = (0..self.residual.len())
            .filter(|&i| self.residual[i] >= power - self.tol)
            .collect();
        if candidates.len() > 1 && self.first_branch.is_none() {
            self.first_branch = Some((lag, candidates.len()));
        }
        for id in candidates {
            self.residual[id] -= power;
            self.reversed.push(id);
            self.visit(power * self.alpha);
            self.reversed.pop();
            self.residual[id] += power;
            if self.done() {
                return;
            }
        }
    }

    fn reencodes(&self, ids: &[usize]) -> bool {
        let mut z = vec![0.0; self.code.len()];
        for &id in ids {
            for v in z.iter_mut() {
                *v *= self.alpha;
            }
            z[id] += 1.0;
        }
        z.iter()
            .zip(self.code)
            .all(|(a, b)| (a - b).abs() <= self.tol)
    }
}
