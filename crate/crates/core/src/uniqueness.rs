//! Collision and critical-factor analysis for FOFE codes.
//!
//! Two codes collide when every coordinate differs by less than `epsilon`
//! (max-norm). Counting colliding pairs among millions of codes is done with
//! grid bucketing, never all pairs:
//!
//! * low-dimensional dense codes (`K <= 3`) are bucketed on a grid of cell
//!   width just under `epsilon / 2` over every coordinate. Pairs in cells at
//!   Chebyshev offset `<= 1` are within `epsilon` by construction and are
//!   counted wholesale; offsets 2 and 3 are checked pair by pair.
//! * sparse or wide codes are bucketed on their anchor coordinate. The
//!   largest entry of a non-empty code is at least 1, so a partner within
//!   `epsilon` must hold more than `1 - epsilon` at that same coordinate.
//!   Every code is posted under each coordinate above that threshold, keyed
//!   by an `epsilon`-wide cell of its value, and candidates are verified on
//!   the full max-norm.
//!
//! Critical forgetting factors are the roots in `(0.5, 1)` of
//! `sum_t xi_t alpha^t = 1` for `xi` in `{0,1}^T`.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::TokenizedCorpus;
use crate::encoding::{encode_prefixes, ForgettingFactor, Regime, SparseCode, TokenSequence};

/// Largest number of sequences [`enumerate_collisions`] will encode.
pub const ENUMERATION_LIMIT: u128 = 1 << 22;
/// Largest polynomial order accepted by [`find_critical_alphas`].
pub const MAX_CRITICAL_ORDER: usize = 20;
/// Initial brackets per polynomial on `(0.5, 1)`.
pub const ROOT_BRACKETS: usize = 4096;
/// Roots closer than this are reported once.
pub const ROOT_DEDUPE_TOL: f64 = 1e-9;
/// Colliding pairs kept as examples in a report.
pub const MAX_EXAMPLE_PAIRS: usize = 10;

const DENSE_GRID_MAX_DIM: usize = 3;
const CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("too-large: {cases} sequences to enumerate exceeds the limit of {limit}")]
    TooLarge { cases: u128, limit: u128 },
    #[error("too-large: polynomial order {order} exceeds the limit of {limit}")]
    OrderTooLarge { order: usize, limit: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("vocabulary size and sequence length must be positive")]
    EmptyProblem,
}

/// Which sequences an enumeration covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthMode {
    /// Every sequence of length exactly `T`.
    Exact,
    /// Every sequence of length `1..=T`.
    UpTo,
}

impl LengthMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LengthMode::Exact => "exact-length",
            LengthMode::UpTo => "up-to-length",
        }
    }
}

impl std::str::FromStr for LengthMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" | "exact-length" => Ok(LengthMode::Exact),
            "up-to" | "up-to-length" => Ok(LengthMode::UpTo),
            other => Err(format!("unknown length mode '{other}' (expected exact or up-to)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    pub alpha: ForgettingFactor,
    pub epsilon: f64,
    pub vocab_size: usize,
    /// Sequence length (enumeration) or longest prefix (corpus scan).
    pub max_len: usize,
    pub cases_tested: u64,
    /// Unordered pairs of distinct sequences whose codes collide.
    pub collisions: u64,
    pub example_pairs: Vec<(Vec<usize>, Vec<usize>)>,
}

impl CollisionReport {
    pub const TSV_HEADER: &'static str = "alpha\tepsilon\tK\tT\tcases\tcollisions";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.alpha, self.epsilon, self.vocab_size, self.max_len, self.cases_tested, self.collisions
        )
    }
}

/// Header plus one row per report.
pub fn collision_reports_tsv(reports: &[CollisionReport]) -> String {
    let mut out = String::from(CollisionReport::TSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.tsv_row());
        out.push('\n');
    }
    out
}

fn check_epsilon(epsilon: f64) -> Result<(), LabError> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidEpsilon(epsilon))
    }
}

/// Number of sequences covered by an enumeration, saturating far above the limit.
pub fn enumeration_size(vocab_size: usize, len: usize, mode: LengthMode) -> u128 {
    let k = vocab_size as u128;
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for t in 1..=len {
        level = level.saturating_mul(k).min(u128::MAX / 4);
        if mode == LengthMode::UpTo || t == len {
            total = total.saturating_add(level);
        }
    }
    total
}

/// Codes of every sequence in an enumeration, in lexicographic order within
/// each length, shorter lengths first.
struct Enumeration {
    vocab_size: usize,
    /// `(first index, length)` of each block of equal-length sequences.
    blocks: Vec<(usize, usize)>,
    /// Row-major, `vocab_size` entries per sequence.
    codes: Vec<f64>,
}

impl Enumeration {
    fn build(vocab_size: usize, len: usize, alpha: f64, mode: LengthMode) -> Self {
        let k = vocab_size;
        let mut blocks = Vec::new();
        let mut codes = Vec::new();
        // Codes of all sequences of the current length, extended one token at a time.
        let mut level: Vec<f64> = vec![0.0; k];
        for t in 1..=len {
            let prev_count = level.len() / k;
            let mut next = Vec::with_capacity(prev_count * k * k);
            for p in 0..prev_count {
                let prev = &level[p * k..(p + 1) * k];
                for id in 0..k {
                    next.extend(prev.iter().map(|v| alpha * v));
                    let last = next.len() - k + id;
                    next[last] += 1.0;
                }
            }
            level = next;
            if mode == LengthMode::UpTo || t == len {
                blocks.push((codes.len() / k, t));
                codes.extend_from_slice(&level);
            }
        }
        Enumeration {
            vocab_size,
            blocks,
            codes,
        }
    }

    fn len(&self) -> usize {
        self.codes.len() / self.vocab_size
    }

    fn sequence(&self, index: usize) -> Vec<usize> {
        let &(start, len) = self
            .blocks
            .iter()
            .rev()
            .find(|(start, _)| *start <= index)
            .expect("index inside enumeration");
        let mut rank = index - start;
        let mut ids = vec![0; len];
        for slot in ids.iter_mut().rev() {
            *slot = rank % self.vocab_size;
            rank /= self.vocab_size;
        }
        ids
    }
}

/// Encodes every sequence over `vocab_size` symbols of the requested length(s)
/// and counts colliding pairs.
pub fn enumerate_collisions(
    vocab_size: usize,
    len: usize,
    alpha: ForgettingFactor,
    epsilon: f64,
    mode: LengthMode,
) -> Result<CollisionReport, LabError> {
    check_epsilon(epsilon)?;
    if vocab_size == 0 || len == 0 {
        return Err(LabError::EmptyProblem);
    }
    let cases = enumeration_size(vocab_size, len, mode);
    if cases > ENUMERATION_LIMIT {
        return Err(LabError::TooLarge {
            cases,
            limit: ENUMERATION_LIMIT,
        });
    }
    let enumeration = Enumeration::build(vocab_size, len, alpha.value(), mode);
    let (collisions, pairs) = if vocab_size <= DENSE_GRID_MAX_DIM {
        count_dense_collisions(&enumeration.codes, vocab_size, epsilon)
    } else {
        let sparse: Vec<SparseCode> = enumeration
            .codes
            .chunks(vocab_size)
            .map(sparse_from_dense)
            .collect();
        count_sparse_collisions(&sparse, epsilon)
    };
    Ok(CollisionReport {
        alpha,
        epsilon,
        vocab_size,
        max_len: len,
        cases_tested: enumeration.len() as u64,
        collisions,
        example_pairs: pairs
            .into_iter()
            .map(|(a, b)| (enumeration.sequence(a), enumeration.sequence(b)))
            .collect(),
    })
}

fn sparse_from_dense(dense: &[f64]) -> SparseCode {
    let entries: Vec<(usize, f64)> = dense
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect();
    SparseCode::from_sorted(entries)
}

/// All-pairs collision count; the reference for the bucketed counters.
pub fn count_collisions_brute_force(codes: &[Vec<f64>], epsilon: f64) -> u64 {
    let mut count = 0;
    for i in 0..codes.len() {
        for j in i + 1..codes.len() {
            if max_abs_diff(&codes[i], &codes[j]) < epsilon {
                count += 1;
            }
        }
    }
    count
}

#[inline]
fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Result of one bucket's work, merged in bucket order.
#[derive(Default)]
struct Partial {
    count: u64,
    pairs: Vec<(usize, usize)>,
}

impl Partial {
    fn push_pair(&mut self, a: usize, b: usize) {
        if self.pairs.len() < MAX_EXAMPLE_PAIRS {
            self.pairs.push((a.min(b), a.max(b)));
        }
    }

    fn merge(parts: Vec<Partial>) -> (u64, Vec<(usize, usize)>) {
        let mut count = 0;
        let mut pairs = Vec::new();
        for p in parts {
            count += p.count;
            for pair in p.pairs {
                if pairs.len() < MAX_EXAMPLE_PAIRS {
                    pairs.push(pair);
                }
            }
        }
        (count, pairs)
    }
}

/// Grid count over every coordinate of `dim`-wide codes, `dim <= 3`.
fn count_dense_collisions(codes: &[f64], dim: usize, epsilon: f64) -> (u64, Vec<(usize, usize)>) {
    assert!((1..=DENSE_GRID_MAX_DIM).contains(&dim));
    let n = codes.len() / dim;
    // Slightly under eps/2 so that two cells apart is strictly within eps,
    // with margin for rounding in the cell computation.
    let width = 0.5 * epsilon * (1.0 - 1e-9);
    let cell_of = |i: usize| -> [i64; DENSE_GRID_MAX_DIM] {
        let mut key = [0i64; DENSE_GRID_MAX_DIM];
        for d in 0..dim {
            key[d] = (codes[i * dim + d] / width).floor() as i64;
        }
        key
    };

    let mut order: Vec<(usize, [i64; DENSE_GRID_MAX_DIM])> = (0..n).map(|i| (i, cell_of(i))).collect();
    order.sort_unstable_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    // Contiguous copy of the codes in cell order.
    let mut points = Vec::with_capacity(codes.len());
    for &(i, _) in &order {
        points.extend_from_slice(&codes[i * dim..(i + 1) * dim]);
    }
    let mut cells: Vec<([i64; DENSE_GRID_MAX_DIM], usize, usize)> = Vec::new();
    for (pos, &(_, key)) in order.iter().enumerate() {
        match cells.last_mut() {
            Some(last) if last.0 == key => last.2 = pos + 1,
            _ => cells.push((key, pos, pos + 1)),
        }
    }
    let lookup: HashMap<[i64; DENSE_GRID_MAX_DIM], usize> =
        cells.iter().enumerate().map(|(c, cell)| (cell.0, c)).collect();

    // Offsets with Chebyshev radius <= 3 that are lexicographically positive,
    // so each unordered cell pair is visited once.
    let mut offsets: Vec<[i64; DENSE_GRID_MAX_DIM]> = Vec::new();
    let span = 7i64.pow(dim as u32);
    for code in 0..span {
        let mut off = [0i64; DENSE_GRID_MAX_DIM];
        let mut rest = code;
        for slot in off.iter_mut().take(dim) {
            *slot = rest % 7 - 3;
            rest /= 7;
        }
        if off > [0; DENSE_GRID_MAX_DIM] {
            offsets.push(off);
        }
    }

    let parts: Vec<Partial> = (0..cells.len())
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|c| {
            let (key, start, end) = cells[c];
            let mut part = Partial::default();
            let size = (end - start) as u64;
            part.count += size * size.saturating_sub(1) / 2;
            for a in start..end {
                for b in a + 1..end {
                    if part.pairs.len() >= MAX_EXAMPLE_PAIRS {
                        break;
                    }
                    part.push_pair(order[a].0, order[b].0);
                }
            }
            for off in &offsets {
                let mut other = key;
                for d in 0..dim {
                    other[d] += off[d];
                }
                let Some(&oc) = lookup.get(&other) else {
                    continue;
                };
                let (_, ostart, oend) = cells[oc];
                let near = off.iter().all(|o| o.abs() <= 1);
                if near {
                    part.count += size * (oend - ostart) as u64;
                    for a in start..end {
                        for b in ostart..oend {
                            if part.pairs.len() >= MAX_EXAMPLE_PAIRS {
                                break;
                            }
                            part.push_pair(order[a].0, order[b].0);
                        }
                    }
                } else {
                    for a in start..end {
                        let pa = &points[a * dim..(a + 1) * dim];
                        for b in ostart..oend {
                            let pb = &points[b * dim..(b + 1) * dim];
                            if max_abs_diff(pa, pb) < epsilon {
                                part.count += 1;
                                part.push_pair(order[a].0, order[b].0);
                            }
                        }
                    }
                }
            }
            part
        })
        .collect();
    Partial::merge(parts)
}

/// Anchor-coordinate bucketing for sparse codes of non-empty sequences.
fn count_sparse_collisions(codes: &[SparseCode], epsilon: f64) -> (u64, Vec<(usize, usize)>) {
    let n = codes.len();
    if epsilon >= 1.0 {
        // The anchor argument needs epsilon < 1; fall back to all pairs.
        let parts: Vec<Partial> = (0..n)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|a| {
                let mut part = Partial::default();
                for b in a + 1..n {
                    if codes[a].max_abs_diff(&codes[b]) < epsilon {
                        part.count += 1;
                        part.push_pair(a, b);
                    }
                }
                part
            })
            .collect();
        return Partial::merge(parts);
    }

    let width = epsilon * (1.0 + 1e-9);
    let threshold = 1.0 - epsilon - 1e-12;
    let mut postings: HashMap<(usize, i64), Vec<u32>> = HashMap::new();
    for (b, code) in codes.iter().enumerate() {
        for &(id, v) in code.entries() {
            if v > threshold {
                postings
                    .entry((id, (v / width).floor() as i64))
                    .or_default()
                    .push(b as u32);
            }
        }
    }

    let parts: Vec<Partial> = (0..n)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|a| {
            let mut part = Partial::default();
            let Some((anchor, value)) = codes[a]
                .entries()
                .iter()
                .copied()
                .fold(None, |best: Option<(usize, f64)>, (id, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((id, v)),
                })
            else {
                return part;
            };
            let cell = (value / width).floor() as i64;
            for c in cell - 1..=cell + 1 {
                let Some(bucket) = postings.get(&(anchor, c)) else {
                    continue;
                };
                // Buckets are in increasing index order.
                let from = bucket.partition_point(|&b| (b as usize) <= a);
                for &b in &bucket[from..] {
                    let b = b as usize;
                    if codes[a].max_abs_diff(&codes[b]) < epsilon {
                        part.count += 1;
                        part.push_pair(a, b);
                    }
                }
            }
            part
        })
        .collect();
    let (count, mut pairs) = Partial::merge(parts);
    pairs.sort_unstable();
    (count, pairs)
}

/// Encodes every within-sentence prefix of the corpus and counts colliding
/// pairs among distinct prefixes. Repeated identical prefixes count once.
pub fn scan_corpus_collisions(
    corpus: &TokenizedCorpus,
    alpha: ForgettingFactor,
    epsilon: f64,
) -> Result<CollisionReport, LabError> {
    check_epsilon(epsilon)?;
    let mut seen: HashMap<&[usize], ()> = HashMap::new();
    let mut prefixes: Vec<&[usize]> = Vec::new();
    let mut codes: Vec<SparseCode> = Vec::new();
    let mut max_len = 0;
    for sentence in corpus.sentences() {
        let ids = sentence.ids();
        let rows = encode_prefixes(sentence, alpha);
        for (t, code) in rows.sparse_rows().iter().enumerate() {
            let prefix = &ids[..=t];
            if seen.insert(prefix, ()).is_none() {
                prefixes.push(prefix);
                codes.push(code.clone());
                max_len = max_len.max(t + 1);
            }
        }
    }
    let (collisions, pairs) = count_sparse_collisions(&codes, epsilon);
    Ok(CollisionReport {
        alpha,
        epsilon,
        vocab_size: corpus.vocab_size(),
        max_len,
        cases_tested: codes.len() as u64,
        collisions,
        example_pairs: pairs
            .into_iter()
            .map(|(a, b)| (prefixes[a].to_vec(), prefixes[b].to_vec()))
            .collect(),
    })
}

/// Sparse-code collision count over explicit sequences (all must be non-empty
/// and share a vocabulary). Exposed for cross-checking the bucketed counters.
pub fn count_sequence_collisions(
    sequences: &[TokenSequence],
    alpha: ForgettingFactor,
    epsilon: f64,
) -> Result<u64, LabError> {
    check_epsilon(epsilon)?;
    let codes: Vec<SparseCode> = sequences
        .iter()
        .map(|s| {
            encode_prefixes(s, alpha)
                .sparse_rows()
                .last()
                .cloned()
                .unwrap_or_default()
        })
        .collect();
    Ok(count_sparse_collisions(&codes, epsilon).0)
}

/// A coefficient vector `xi` in `{0,1}^T`; bit `t - 1` holds `xi_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Xi {
    pub bits: u32,
    pub order: usize,
}

impl Xi {
    /// `sum_t xi_t alpha^t - 1`.
    pub fn residual(self, alpha: f64) -> f64 {
        let mut acc = 0.0;
        for t in (1..=self.order).rev() {
            acc = acc * alpha + if self.bits >> (t - 1) & 1 == 1 { 1.0 } else { 0.0 };
        }
        acc * alpha - 1.0
    }

    /// `xi_1 xi_2 .. xi_T` as a string of 0/1 characters.
    pub fn to_bit_string(self) -> String {
        (0..self.order)
            .map(|t| if self.bits >> t & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

/// One polynomial's root in `(0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub xi: Xi,
    /// The root of this particular polynomial.
    pub alpha: f64,
}

/// A critical forgetting factor and every `xi` whose polynomial vanishes there.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRoot {
    pub alpha: f64,
    pub generators: Vec<Generator>,
}

impl CriticalRoot {
    /// Largest `|p_xi(alpha)|` over the generators, each at its own root.
    pub fn residual(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.xi.residual(g.alpha).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalAlphaSet {
    pub max_order: usize,
    /// Sorted by `alpha`.
    pub roots: Vec<CriticalRoot>,
}

impl CriticalAlphaSet {
    pub const TSV_HEADER: &'static str = "alpha\txi_bits\tresidual";

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::TSV_HEADER);
        out.push('\n');
        for root in &self.roots {
            let bits: Vec<String> = root.generators.iter().map(|g| g.xi.to_bit_string()).collect();
            out.push_str(&format!("{}\t{}\t{:e}\n", root.alpha, bits.join(","), root.residual()));
        }
        out
    }

    /// Root closest to `alpha`, if any.
    pub fn nearest(&self, alpha: f64) -> Option<f64> {
        let pos = self.roots.partition_point(|r| r.alpha < alpha);
        let below = pos.checked_sub(1).map(|i| self.roots[i].alpha);
        let above = self.roots.get(pos).map(|r| r.alpha);
        match (below, above) {
            (Some(b), Some(a)) => Some(if alpha - b <= a - alpha { b } else { a }),
            (b, a) => b.or(a),
        }
    }
}

/// Root of `xi`'s polynomial in `(0.5, 1)`, if it has one.
///
/// The interval is cut into [`ROOT_BRACKETS`] brackets; the bracket holding the
/// sign change is refined by bisection until the endpoints are adjacent floats.
/// With non-negative coefficients the polynomial is increasing on `(0, inf)`,
/// so there is at most one sign change and it is located by binary search over
/// the bracket grid instead of a linear scan.
pub fn polynomial_root(xi: Xi) -> Option<f64> {
    let grid = |k: usize| 0.5 + 0.5 * k as f64 / ROOT_BRACKETS as f64;
    let p = |a: f64| xi.residual(a);
    if p(grid(ROOT_BRACKETS)) <= 0.0 {
        // Single nonzero coefficient: the root is alpha = 1, outside the interval.
        return None;
    }
    // First grid point with p > 0; p(0.5) < 0 for any finite T.
    let (mut lo_k, mut hi_k) = (0usize, ROOT_BRACKETS);
    while hi_k - lo_k > 1 {
        let mid = (lo_k + hi_k) / 2;
        if p(grid(mid)) > 0.0 {
            hi_k = mid;
        } else {
            lo_k = mid;
        }
    }
    let (mut lo, mut hi) = (grid(lo_k), grid(hi_k));
    if p(lo) == 0.0 {
        return Some(lo).filter(|&r| r > 0.5);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = p(mid);
        if v == 0.0 {
            return Some(mid);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = if p(lo).abs() <= p(hi).abs() { lo } else { hi };
    (root > 0.5 && root < 1.0).then_some(root)
}

/// Every critical forgetting factor for sequences up to length `order`.
pub fn find_critical_alphas(order: usize) -> Result<CriticalAlphaSet, LabError> {
    if order > MAX_CRITICAL_ORDER {
        return Err(LabError::OrderTooLarge {
            order,
            limit: MAX_CRITICAL_ORDER,
        });
    }
    if order == 0 {
        return Ok(CriticalAlphaSet {
            max_order: 0,
            roots: Vec::new(),
        });
    }
    let count: u32 = 1 << order;
    let mut found: Vec<Generator> = (1..count)
        .into_par_iter()
        .with_min_len(CHUNK)
        .filter_map(|bits| {
            let xi = Xi { bits, order };
            polynomial_root(xi).map(|alpha| Generator { xi, alpha })
        })
        .collect();
    found.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.xi.cmp(&b.xi)));

    let mut roots: Vec<CriticalRoot> = Vec::new();
    for g in found {
        match roots.last_mut() {
            Some(root) if g.alpha - root.alpha < ROOT_DEDUPE_TOL => root.generators.push(g),
            _ => roots.push(CriticalRoot {
                alpha: g.alpha,
                generators: vec![g],
            }),
        }
    }
    Ok(CriticalAlphaSet {
        max_order: order,
        roots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyVerdict {
    pub safe: bool,
    pub nearest_root: Option<f64>,
    /// Distance to the nearest root; infinite when there is none.
    pub distance: f64,
}

/// Whether `alpha` keeps more than `margin` away from every critical root of
/// order `order`. Factors in the unique regime are always safe.
pub fn is_alpha_safe(
    alpha: ForgettingFactor,
    order: usize,
    margin: f64,
) -> Result<SafetyVerdict, LabError> {
    let set = find_critical_alphas(order)?;
    Ok(verdict_against(&set, alpha, margin))
}

/// [`is_alpha_safe`] against a precomputed root set.
pub fn verdict_against(set: &CriticalAlphaSet, alpha: ForgettingFactor, margin: f64) -> SafetyVerdict {
    let nearest_root = set.nearest(alpha.value());
    let distance = nearest_root.map_or(f64::INFINITY, |r| (r - alpha.value()).abs());
    SafetyVerdict {
        safe: alpha.regime() == Regime::Unique || distance > margin,
        nearest_root,
        distance,
    }
}
