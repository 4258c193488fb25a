//! Stratified cross-validation folds, early-stopping holdouts and 1:1
//! oversampling of the candy class.
//!
//! Every random choice comes from SplitMix64 seeded per stratum, followed by
//! a Fisher-Yates shuffle with an unbiased bounded draw. Members of a stratum
//! are sorted by key before shuffling, so results depend only on the set of
//! comments and the seed, never on input order.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::corpus::{AnnotatedComment, CommentKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StratifyMode {
    /// Stratify by the comment-level candy flag.
    Binary,
    /// Stratify by the type of the first span (smallest `(start, end)`).
    FirstSpanType,
}

impl StratifyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StratifyMode::Binary => "binary",
            StratifyMode::FirstSpanType => "first_span_type",
        }
    }
}

impl fmt::Display for StratifyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for StratifyMode {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(StratifyMode::Binary),
            "first_span_type" | "first-span-type" => Ok(StratifyMode::FirstSpanType),
            other => Err(SplitError::UnknownMode(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StratumKey {
    pub mode: StratifyMode,
    /// `yes`/`no` in binary mode; a candy type name or `none` otherwise.
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("{folds} folds requested but the corpus has only {comments} comment(s)")]
    MoreFoldsThanComments { folds: usize, comments: usize },
    #[error("holdout fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("fraction {fraction} of {comments} comment(s) leaves {train} for training and {holdout} for holdout")]
    InfeasibleHoldout {
        fraction: f64,
        comments: usize,
        train: usize,
        holdout: usize,
    },
    #[error("oversampling needs both classes, but the corpus has no {0} comments")]
    MissingClass(&'static str),
    #[error("unknown stratify mode `{0}` (expected binary or first_span_type)")]
    UnknownMode(String),
}

pub fn stratum_key(ac: &AnnotatedComment, mode: StratifyMode) -> StratumKey {
    let value = match mode {
        StratifyMode::Binary => if ac.is_candy { "yes" } else { "no" }.into(),
        StratifyMode::FirstSpanType => ac
            .spans
            .iter()
            .min_by_key(|s| (s.start, s.end))
            .map_or("none", |s| s.candy_type.name())
            .into(),
    };
    StratumKey { mode, value }
}

/// FNV-1a, 64-bit.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn stream(seed: u64, salt: &str) -> SplitMix64 {
    SplitMix64::from_seed((seed ^ fnv1a64(salt.as_bytes())).to_le_bytes())
}

/// Uniform draw from `0..n` (`n > 0`), rejecting the low `2^64 mod n` values.
pub(crate) fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return x % n;
        }
    }
}

pub(crate) fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Groups comment indices by stratum value, each group sorted by key and then
/// shuffled with its own stream.
fn shuffled_strata(
    corpus: &[AnnotatedComment],
    mode: StratifyMode,
    seed: u64,
) -> BTreeMap<String, Vec<usize>> {
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, ac) in corpus.iter().enumerate() {
        strata
            .entry(stratum_key(ac, mode).value)
            .or_default()
            .push(i);
    }
    for (value, members) in strata.iter_mut() {
        members.sort_by(|&a, &b| {
            let (ca, cb) = (&corpus[a].comment, &corpus[b].comment);
            (ca.document.as_str(), ca.comment_id).cmp(&(cb.document.as_str(), cb.comment_id))
        });
        let mut rng = stream(seed, value);
        shuffle(&mut rng, members);
    }
    strata
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_count: usize,
    pub assignment: BTreeMap<CommentKey, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, key: &CommentKey) -> Option<usize> {
        self.assignment.get(key).copied()
    }

    /// Keys per fold, each list in key order.
    pub fn folds(&self) -> Vec<Vec<CommentKey>> {
        let mut out = alloc::vec![Vec::new(); self.fold_count];
        for (k, &f) in &self.assignment {
            out[f].push(k.clone());
        }
        out
    }

    /// Splits `corpus` into (training, validation) for fold `fold`.
    pub fn split<'a>(
        &self,
        corpus: &'a [AnnotatedComment],
        fold: usize,
    ) -> (Vec<&'a AnnotatedComment>, Vec<&'a AnnotatedComment>) {
        corpus
            .iter()
            .partition(|ac| self.fold_of(&ac.key()) != Some(fold))
    }
}

/// Deals each shuffled stratum round-robin over `k` folds.
///
/// The dealing position carries over from one stratum to the next (strata in
/// value order), which keeps total fold sizes within one of each other as
/// well.
pub fn make_folds(
    corpus: &[AnnotatedComment],
    k: usize,
    mode: StratifyMode,
    seed: u64,
) -> Result<FoldAssignment, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewFolds(k));
    }
    if corpus.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }
    if k > corpus.len() {
        return Err(SplitError::MoreFoldsThanComments {
            folds: k,
            comments: corpus.len(),
        });
    }

    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for members in shuffled_strata(corpus, mode, seed).values() {
        for &i in members {
            assignment.insert(corpus[i].key(), next % k);
            next += 1;
        }
    }
    Ok(FoldAssignment {
        fold_count: k,
        assignment,
    })
}

/// Per-stratum holdout quotas: floors of `fraction * size`, then the rest of
/// `round(fraction * n)` handed out by largest remainder. A stratum with two
/// or more members always keeps one for training.
fn holdout_quotas(sizes: &[usize], fraction: f64, target: usize) -> Vec<usize> {
    let cap = |n: usize| if n >= 2 { n - 1 } else { n };
    let exact: Vec<f64> = sizes.iter().map(|&n| fraction * n as f64).collect();
    // Values are non-negative, so truncation is the floor.
    let mut quota: Vec<usize> = sizes
        .iter()
        .zip(&exact)
        .map(|(&n, &x)| (x as usize).min(cap(n)))
        .collect();

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // Stable sort keeps stratum value order among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - (exact[a] as usize) as f64;
        let rb = exact[b] - (exact[b] as usize) as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal)
    });

    let mut assigned: usize = quota.iter().sum();
    while assigned < target {
        let mut progressed = false;
        for &s in &order {
            if assigned == target {
                break;
            }
            if quota[s] < cap(sizes[s]) {
                quota[s] += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    quota
}

/// Stratified holdout split. Returns `(train, holdout)`, each in input order.
pub fn holdout_split(
    corpus: &[AnnotatedComment],
    fraction: f64,
    mode: StratifyMode,
    seed: u64,
) -> Result<(Vec<AnnotatedComment>, Vec<AnnotatedComment>), SplitError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError::InvalidFraction(fraction));
    }
    let n = corpus.len();
    let target = round_half_up(fraction * n as f64);

    let strata = shuffled_strata(corpus, mode, seed);
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = holdout_quotas(&sizes, fraction, target);

    let mut in_holdout = alloc::vec![false; n];
    for (members, &q) in strata.values().zip(&quotas) {
        for &i in &members[..q] {
            in_holdout[i] = true;
        }
    }
    let holdout_len = quotas.iter().sum::<usize>();
    if holdout_len == 0 || holdout_len == n {
        return Err(SplitError::InfeasibleHoldout {
            fraction,
            comments: n,
            train: n - holdout_len,
            holdout: holdout_len,
        });
    }

    let (mut train, mut holdout) = (Vec::new(), Vec::new());
    for (ac, h) in corpus.iter().zip(in_holdout) {
        if h {
            holdout.push(ac.clone());
        } else {
            train.push(ac.clone());
        }
    }
    Ok((train, holdout))
}

/// Rounds a non-negative value, halves upward. `f64::round` is not in `core`.
fn round_half_up(x: f64) -> usize {
    let f = x as usize;
    if x - f as f64 >= 0.5 {
        f + 1
    } else {
        f
    }
}

/// A comment in an oversampled corpus. Originals have `replica == 0`; the
/// n-th extra copy of a comment has `replica == n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replica {
    pub comment: AnnotatedComment,
    pub replica: u32,
}

impl Replica {
    pub fn key(&self) -> (CommentKey, u32) {
        (self.comment.key(), self.replica)
    }
}

/// Brings the candy class up to the size of the non-candy class by drawing
/// candy comments uniformly with replacement. Originals come first, in input
/// order, followed by the drawn replicas.
///
/// A corpus that already has at least as many candy as non-candy comments is
/// returned unchanged.
pub fn oversample_binary(
    corpus: &[AnnotatedComment],
    seed: u64,
) -> Result<Vec<Replica>, SplitError> {
    let mut candy: Vec<&AnnotatedComment> = corpus.iter().filter(|ac| ac.is_candy).collect();
    let non_candy = corpus.len() - candy.len();
    if candy.is_empty() {
        return Err(SplitError::MissingClass("candy"));
    }
    if non_candy == 0 {
        return Err(SplitError::MissingClass("non-candy"));
    }

    let mut out: Vec<Replica> = corpus
        .iter()
        .map(|ac| Replica {
            comment: ac.clone(),
            replica: 0,
        })
        .collect();
    if candy.len() >= non_candy {
        return Ok(out);
    }

    candy.sort_by(|a, b| {
        (a.comment.document.as_str(), a.comment.comment_id)
            .cmp(&(b.comment.document.as_str(), b.comment.comment_id))
    });
    let mut rng = stream(seed, "oversample");
    let mut copies = alloc::vec![0u32; candy.len()];
    for _ in 0..non_candy - candy.len() {
        let pick = below(&mut rng, candy.len() as u64) as usize;
        copies[pick] += 1;
        out.push(Replica {
            comment: candy[pick].clone(),
            replica: copies[pick],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CandyType, Comment, SpanAnnotation};
    use alloc::format;
    use alloc::vec;

    fn ac(id: u64, spans: Vec<SpanAnnotation>) -> AnnotatedComment {
        AnnotatedComment::from_spans(Comment::new("doc", id, format!("text {id}")), spans)
    }

    fn binary_corpus(candy: u64, non_candy: u64) -> Vec<AnnotatedComment> {
        (0..candy)
            .map(|i| ac(i, vec![SpanAnnotation::new(0, 4, CandyType::Compliment)]))
            .chain((candy..candy + non_candy).map(|i| ac(i, vec![])))
            .collect()
    }

    #[test]
    fn splitmix_reference_stream() {
        // Reference values for seed 0 from the published SplitMix64 generator.
        let mut rng = SplitMix64::from_seed(0u64.to_le_bytes());
        assert_eq!(rng.next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(rng.next_u64(), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn fnv_reference() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = stream(7, "x");
        for n in 1..50u64 {
            for _ in 0..20 {
                assert!(below(&mut rng, n) < n);
            }
        }
    }

    #[test]
    fn stratum_keys() {
        let none = ac(1, vec![]);
        assert_eq!(stratum_key(&none, StratifyMode::Binary).value, "no");
        assert_eq!(
            stratum_key(&none, StratifyMode::FirstSpanType).value,
            "none"
        );
        let c = AnnotatedComment {
            comment: Comment::new("d", 1, "x".repeat(30)),
            is_candy: true,
            // Deliberately unsorted.
            spans: vec![
                SpanAnnotation::new(10, 20, CandyType::Gratitude),
                SpanAnnotation::new(0, 5, CandyType::Compliment),
            ],
        };
        assert_eq!(
            stratum_key(&c, StratifyMode::FirstSpanType).value,
            "compliment"
        );
        assert_eq!(stratum_key(&c, StratifyMode::Binary).value, "yes");
    }

    #[test]
    fn five_by_two_balance() {
        let corpus = binary_corpus(5, 5);
        let folds = make_folds(&corpus, 5, StratifyMode::Binary, 42).unwrap();
        for fold in folds.folds() {
            let candy = fold.iter().filter(|k| k.comment_id < 5).count();
            assert_eq!(candy, 1);
            assert_eq!(fold.len() - candy, 1);
        }
    }

    #[test]
    fn fold_errors() {
        let one = binary_corpus(1, 0);
        assert_eq!(
            make_folds(&one, 2, StratifyMode::Binary, 1),
            Err(SplitError::MoreFoldsThanComments {
                folds: 2,
                comments: 1
            })
        );
        assert_eq!(
            make_folds(&one, 1, StratifyMode::Binary, 1),
            Err(SplitError::TooFewFolds(1))
        );
        assert_eq!(
            make_folds(&[], 2, StratifyMode::Binary, 1),
            Err(SplitError::EmptyCorpus)
        );
    }

    #[test]
    fn folds_are_deterministic_and_order_free() {
        let corpus = binary_corpus(13, 29);
        let a = make_folds(&corpus, 5, StratifyMode::Binary, 42).unwrap();
        let b = make_folds(&corpus, 5, StratifyMode::Binary, 42).unwrap();
        assert_eq!(a, b);
        let mut reversed = corpus.clone();
        reversed.reverse();
        assert_eq!(
            make_folds(&reversed, 5, StratifyMode::Binary, 42).unwrap(),
            a
        );
        assert_ne!(make_folds(&corpus, 5, StratifyMode::Binary, 43).unwrap(), a);
    }

    #[test]
    fn holdout_ten_percent() {
        let corpus = binary_corpus(37, 63);
        let (train, holdout) = holdout_split(&corpus, 0.1, StratifyMode::Binary, 42).unwrap();
        assert_eq!((train.len(), holdout.len()), (90, 10));
        let candy = holdout.iter().filter(|c| c.is_candy).count();
        // 3.7 and 6.3 have floors 3 and 6; the larger remainder gets the last slot.
        assert_eq!(candy, 4);
    }

    #[test]
    fn holdout_two_singletons() {
        let corpus = binary_corpus(1, 1);
        let (train, holdout) = holdout_split(&corpus, 0.5, StratifyMode::Binary, 0).unwrap();
        assert_eq!((train.len(), holdout.len()), (1, 1));
    }

    #[test]
    fn holdout_errors() {
        let corpus = binary_corpus(2, 2);
        assert!(matches!(
            holdout_split(&corpus, 0.0, StratifyMode::Binary, 0),
            Err(SplitError::InvalidFraction(_))
        ));
        assert!(matches!(
            holdout_split(&corpus, 1.0, StratifyMode::Binary, 0),
            Err(SplitError::InvalidFraction(_))
        ));
        assert!(matches!(
            holdout_split(&corpus, 0.01, StratifyMode::Binary, 0),
            Err(SplitError::InfeasibleHoldout { holdout: 0, .. })
        ));
        // Every stratum of size two keeps one member, so at most two go out.
        let (train, holdout) = holdout_split(&corpus, 0.99, StratifyMode::Binary, 0).unwrap();
        assert_eq!((train.len(), holdout.len()), (2, 2));
    }

    #[test]
    fn oversample_balanced_is_unchanged() {
        let corpus = binary_corpus(3, 3);
        let out = oversample_binary(&corpus, 1).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|r| r.replica == 0));
    }

    #[test]
    fn oversample_two_to_six() {
        let corpus = binary_corpus(2, 6);
        let out = oversample_binary(&corpus, 42).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(out.iter().filter(|r| r.comment.is_candy).count(), 6);
        let extra = &out[8..];
        assert_eq!(extra.len(), 4);
        assert!(extra
            .iter()
            .all(|r| r.replica >= 1 && r.comment.comment.comment_id < 2));
        let mut keys: Vec<_> = out.iter().map(Replica::key).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 12);
        assert_eq!(oversample_binary(&corpus, 42).unwrap(), out);
    }

    #[test]
    fn oversample_needs_both_classes() {
        assert_eq!(
            oversample_binary(&binary_corpus(0, 3), 1),
            Err(SplitError::MissingClass("candy"))
        );
        assert_eq!(
            oversample_binary(&binary_corpus(3, 0), 1),
            Err(SplitError::MissingClass("non-candy"))
        );
    }
}
