//! Strict span F1, positive-class F1 and span-to-binary label derivation.
//!
//! All ratios are exact. Overall span scores are micro-averaged from global
//! counts; per-type scores are reported alongside. Zero denominators give a
//! ratio of zero.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::iter::Sum;
use core::ops::{Add, AddAssign};

use crate::corpus::{CandyType, CommentKey, SpanAnnotation};
use crate::{ratio_or_zero, Ratio};

/// Spans per comment. Comments present with an empty list are known to have
/// no spans.
pub type SpanIndex = BTreeMap<CommentKey, Vec<SpanAnnotation>>;

/// Binary labels per comment (`true` = candy).
pub type BinaryLabels = BTreeMap<CommentKey, bool>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Counts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            true_positives: self.true_positives + o.true_positives,
            false_positives: self.false_positives + o.false_positives,
            false_negatives: self.false_negatives + o.false_negatives,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scores {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

impl From<Counts> for Scores {
    fn from(c: Counts) -> Scores {
        let precision = ratio_or_zero(c.true_positives, c.true_positives + c.false_positives);
        let recall = ratio_or_zero(c.true_positives, c.true_positives + c.false_negatives);
        let sum = precision + recall;
        let f1 = if *sum.numer() == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::from_integer(2) * precision * recall / sum
        };
        Scores {
            true_positives: c.true_positives,
            false_positives: c.false_positives,
            false_negatives: c.false_negatives,
            precision,
            recall,
            f1,
        }
    }
}

impl Scores {
    pub fn counts(&self) -> Counts {
        Counts {
            true_positives: self.true_positives,
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub overall: Scores,
    /// Scores for every candy type, in type order.
    pub per_type: BTreeMap<CandyType, Scores>,
    /// Predicted comments missing from the gold side. Their spans count as
    /// false positives.
    pub unknown_keys: Vec<CommentKey>,
}

/// Per-type counts for one comment, with set semantics on both sides.
fn comment_counts(gold: &[SpanAnnotation], pred: &[SpanAnnotation]) -> [Counts; 10] {
    let gold: BTreeSet<&SpanAnnotation> = gold.iter().collect();
    let pred: BTreeSet<&SpanAnnotation> = pred.iter().collect();
    let mut out = [Counts::default(); 10];
    for s in &pred {
        let c = &mut out[s.candy_type.index()];
        if gold.contains(s) {
            c.true_positives += 1;
        } else {
            c.false_positives += 1;
        }
    }
    for s in gold.difference(&pred) {
        out[s.candy_type.index()].false_negatives += 1;
    }
    out
}

fn report_from(per_type: [Counts; 10], unknown_keys: Vec<CommentKey>) -> EvalReport {
    let overall = per_type.iter().copied().sum::<Counts>().into();
    EvalReport {
        overall,
        per_type: CandyType::ALL
            .into_iter()
            .map(|t| (t, per_type[t.index()].into()))
            .collect(),
        unknown_keys,
    }
}

/// Strict span matching: a predicted span counts only when a gold span of the
/// same comment has the same start, end and type. Duplicate triplets within
/// a comment collapse to one.
pub fn strict_span_f1(gold: &SpanIndex, pred: &SpanIndex) -> EvalReport {
    let mut totals = [Counts::default(); 10];
    let mut unknown = Vec::new();
    let empty: Vec<SpanAnnotation> = Vec::new();

    for (key, g) in gold {
        let p = pred.get(key).unwrap_or(&empty);
        for (t, c) in totals.iter_mut().zip(comment_counts(g, p)) {
            *t += c;
        }
    }
    for (key, p) in pred {
        if !gold.contains_key(key) {
            unknown.push(key.clone());
            for (t, c) in totals.iter_mut().zip(comment_counts(&empty, p)) {
                *t += c;
            }
        }
    }
    report_from(totals, unknown)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("{} gold comment(s) have no prediction (first: {})", missing.len(), missing[0])]
    MissingPredictions { missing: Vec<CommentKey> },
    #[error("{} prediction(s) for comments absent from gold (first: {})", unexpected.len(), unexpected[0])]
    UnexpectedPredictions { unexpected: Vec<CommentKey> },
}

/// Binary precision/recall/F1 with candy as the positive class. Both sides
/// must cover the same comments.
pub fn positive_f1(gold: &BinaryLabels, pred: &BinaryLabels) -> Result<Scores, MetricsError> {
    let missing: Vec<CommentKey> = gold
        .keys()
        .filter(|k| !pred.contains_key(*k))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingPredictions { missing });
    }
    let unexpected: Vec<CommentKey> = pred
        .keys()
        .filter(|k| !gold.contains_key(*k))
        .cloned()
        .collect();
    if !unexpected.is_empty() {
        return Err(MetricsError::UnexpectedPredictions { unexpected });
    }

    let mut c = Counts::default();
    for (key, &g) in gold {
        match (g, pred[key]) {
            (true, true) => c.true_positives += 1,
            (false, true) => c.false_positives += 1,
            (true, false) => c.false_negatives += 1,
            (false, false) => {}
        }
    }
    Ok(c.into())
}

/// A comment is candy when it has at least one predicted span of any type.
pub fn derive_binary(pred: &SpanIndex, keys: &[CommentKey]) -> BinaryLabels {
    keys.iter()
        .map(|k| (k.clone(), pred.get(k).is_some_and(|s| !s.is_empty())))
        .collect()
}

/// Renders `r` with `places` decimals, rounding half to even.
pub fn format_ratio(r: Ratio, places: u32) -> String {
    let scale = 10u128.pow(places);
    let num = u128::from(*r.numer()) * scale;
    let den = u128::from(*r.denom());
    let (mut q, rem) = (num / den, num % den);
    if 2 * rem > den || (2 * rem == den && q % 2 == 1) {
        q += 1;
    }
    if places == 0 {
        return alloc::format!("{q}");
    }
    alloc::format!(
        "{}.{:0width$}",
        q / scale,
        q % scale,
        width = places as usize
    )
}
