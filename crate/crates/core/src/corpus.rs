//! Annotated comment corpora: types, validation, deduplication and summary
//! statistics.
//!
//! Character offsets everywhere in this crate count Unicode scalar values
//! (`char`s), and spans are half-open `[start, end)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{ratio_or_zero, Ratio};

/// The ten candy-speech span types, in their canonical order.
///
/// The declaration order is load-bearing: it fixes the BIO label ids and the
/// tie-break order used by the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CandyType {
    PositiveFeedback,
    Compliment,
    AffectionDeclaration,
    Encouragement,
    Gratitude,
    Agreement,
    Ambiguous,
    Implicit,
    GroupMembership,
    Sympathy,
}

impl CandyType {
    pub const ALL: [CandyType; 10] = [
        CandyType::PositiveFeedback,
        CandyType::Compliment,
        CandyType::AffectionDeclaration,
        CandyType::Encouragement,
        CandyType::Gratitude,
        CandyType::Agreement,
        CandyType::Ambiguous,
        CandyType::Implicit,
        CandyType::GroupMembership,
        CandyType::Sympathy,
    ];

    /// Identifier form, used inside BIO tag names (`B-positive_feedback`).
    pub fn name(self) -> &'static str {
        match self {
            CandyType::PositiveFeedback => "positive_feedback",
            CandyType::Compliment => "compliment",
            CandyType::AffectionDeclaration => "affection_declaration",
            CandyType::Encouragement => "encouragement",
            CandyType::Gratitude => "gratitude",
            CandyType::Agreement => "agreement",
            CandyType::Ambiguous => "ambiguous",
            CandyType::Implicit => "implicit",
            CandyType::GroupMembership => "group_membership",
            CandyType::Sympathy => "sympathy",
        }
    }

    /// Label form with spaces, as written in span TSV files.
    pub fn label(self) -> &'static str {
        match self {
            CandyType::PositiveFeedback => "positive feedback",
            CandyType::AffectionDeclaration => "affection declaration",
            CandyType::GroupMembership => "group membership",
            other => other.name(),
        }
    }

    /// Position in [`CandyType::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CandyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown candy type `{0}`")]
pub struct UnknownCandyType(pub String);

impl FromStr for CandyType {
    type Err = UnknownCandyType;

    /// Accepts the spaced label (`affection declaration`) or the identifier
    /// form (`affection_declaration`). Nothing else.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CandyType::ALL
            .into_iter()
            .find(|t| t.label() == s || t.name() == s)
            .ok_or_else(|| UnknownCandyType(s.into()))
    }
}

/// Identity of a comment within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommentKey {
    pub document: String,
    pub comment_id: u64,
}

impl CommentKey {
    pub fn new(document: impl Into<String>, comment_id: u64) -> Self {
        CommentKey {
            document: document.into(),
            comment_id,
        }
    }
}

impl fmt::Display for CommentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.document, self.comment_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub document: String,
    pub comment_id: u64,
    pub text: String,
}

impl Comment {
    pub fn new(document: impl Into<String>, comment_id: u64, text: impl Into<String>) -> Self {
        Comment {
            document: document.into(),
            comment_id,
            text: text.into(),
        }
    }

    pub fn key(&self) -> CommentKey {
        CommentKey::new(self.document.clone(), self.comment_id)
    }

    /// Text length in Unicode scalar values.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// A typed half-open character range `[start, end)`.
///
/// Ordering is by `(start, end, type)`, which is also the order in which
/// spans are kept inside an [`AnnotatedComment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpanAnnotation {
    pub start: usize,
    pub end: usize,
    pub candy_type: CandyType,
}

impl SpanAnnotation {
    pub fn new(start: usize, end: usize, candy_type: CandyType) -> Self {
        SpanAnnotation {
            start,
            end,
            candy_type,
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &SpanAnnotation) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedComment {
    pub comment: Comment,
    pub is_candy: bool,
    pub spans: Vec<SpanAnnotation>,
}

impl AnnotatedComment {
    /// Builds an annotated comment with its spans sorted.
    pub fn new(comment: Comment, is_candy: bool, mut spans: Vec<SpanAnnotation>) -> Self {
        spans.sort();
        AnnotatedComment {
            comment,
            is_candy,
            spans,
        }
    }

    /// Like [`AnnotatedComment::new`], deriving `is_candy` from the spans.
    pub fn from_spans(comment: Comment, spans: Vec<SpanAnnotation>) -> Self {
        let is_candy = !spans.is_empty();
        Self::new(comment, is_candy, spans)
    }

    pub fn key(&self) -> CommentKey {
        self.comment.key()
    }
}

/// Machine-readable violation codes reported by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationCode {
    DuplicateKey,
    EmptyText,
    EmptySpan,
    InvertedSpan,
    SpanOutOfBounds,
    UnsortedSpans,
    LabelSpanMismatch,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DuplicateKey => "DUPLICATE_KEY",
            ViolationCode::EmptyText => "EMPTY_TEXT",
            ViolationCode::EmptySpan => "EMPTY_SPAN",
            ViolationCode::InvertedSpan => "INVERTED_SPAN",
            ViolationCode::SpanOutOfBounds => "SPAN_OUT_OF_BOUNDS",
            ViolationCode::UnsortedSpans => "UNSORTED_SPANS",
            ViolationCode::LabelSpanMismatch => "LABEL_SPAN_MISMATCH",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub document: String,
    pub comment_id: u64,
    pub message: String,
}

/// Checks every comment and span invariant and returns all violations found,
/// in corpus order. An empty result means the corpus is valid.
pub fn validate(corpus: &[AnnotatedComment]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();

    for ac in corpus {
        let c = &ac.comment;
        let mut push = |code: ViolationCode, message: String| {
            out.push(Violation {
                code,
                document: c.document.clone(),
                comment_id: c.comment_id,
                message,
            })
        };

        if !seen.insert((c.document.as_str(), c.comment_id)) {
            push(
                ViolationCode::DuplicateKey,
                format!("comment {} occurs more than once", c.key()),
            );
        }
        if c.text.is_empty() {
            push(ViolationCode::EmptyText, "comment text is empty".into());
        }

        let len = c.char_len();
        for (i, s) in ac.spans.iter().enumerate() {
            if s.start == s.end {
                push(
                    ViolationCode::EmptySpan,
                    format!(
                        "span #{i} ({}, {}, {}) is empty",
                        s.start, s.end, s.candy_type
                    ),
                );
            } else if s.start > s.end {
                push(
                    ViolationCode::InvertedSpan,
                    format!("span #{i} starts at {} after its end {}", s.start, s.end),
                );
            }
            if s.end > len || s.start > len {
                push(
                    ViolationCode::SpanOutOfBounds,
                    format!(
                        "span #{i} ({}, {}) exceeds text length {len}",
                        s.start, s.end
                    ),
                );
            }
        }
        if ac.spans.windows(2).any(|w| w[0] > w[1]) {
            push(
                ViolationCode::UnsortedSpans,
                "spans are not sorted by (start, end)".into(),
            );
        }
        if ac.is_candy == ac.spans.is_empty() {
            push(
                ViolationCode::LabelSpanMismatch,
                format!(
                    "is_candy is {} but the comment has {} span(s)",
                    ac.is_candy,
                    ac.spans.len()
                ),
            );
        }
    }
    out
}

/// Comments that share a text but carry different labels. All of them are
/// kept by [`deduplicate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGroup {
    pub text: String,
    pub keys: Vec<CommentKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupReport {
    /// Comments dropped (input size minus output size).
    pub removed_count: usize,
    /// Duplicate groups that lost at least one member.
    pub removed_group_count: usize,
    pub retained_conflicts: Vec<ConflictGroup>,
}

impl DedupReport {
    /// Number of comments inside conflict groups.
    pub fn conflict_comment_count(&self) -> usize {
        self.retained_conflicts.iter().map(|g| g.keys.len()).sum()
    }
}

type LabelSet = (bool, Vec<SpanAnnotation>);

fn label_set(ac: &AnnotatedComment) -> LabelSet {
    let mut spans = ac.spans.clone();
    spans.sort();
    (ac.is_candy, spans)
}

/// Removes comments whose text and labels (candy flag plus span multiset)
/// both repeat, keeping the member with the smallest key.
///
/// Texts that occur with two or more distinct label sets are left untouched
/// and reported as conflicts. Surviving comments keep their input order.
pub fn deduplicate(corpus: Vec<AnnotatedComment>) -> (Vec<AnnotatedComment>, DedupReport) {
    let mut by_text: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ac) in corpus.iter().enumerate() {
        by_text.entry(ac.comment.text.as_str()).or_default().push(i);
    }

    let mut drop = alloc::vec![false; corpus.len()];
    let mut report = DedupReport::default();

    for (text, members) in &by_text {
        if members.len() < 2 {
            continue;
        }
        let labels: BTreeSet<LabelSet> = members.iter().map(|&i| label_set(&corpus[i])).collect();
        if labels.len() > 1 {
            let mut keys: Vec<CommentKey> = members.iter().map(|&i| corpus[i].key()).collect();
            keys.sort();
            report.retained_conflicts.push(ConflictGroup {
                text: String::from(*text),
                keys,
            });
            continue;
        }
        let keep = members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let (ca, cb) = (&corpus[a].comment, &corpus[b].comment);
                (ca.document.as_str(), ca.comment_id).cmp(&(cb.document.as_str(), cb.comment_id))
            })
            .expect("group is non-empty");
        for &i in members {
            if i != keep {
                drop[i] = true;
                report.removed_count += 1;
            }
        }
        report.removed_group_count += 1;
    }

    let kept = corpus
        .into_iter()
        .zip(drop)
        .filter_map(|(ac, d)| (!d).then_some(ac))
        .collect();
    (kept, report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub comment_count: usize,
    pub candy_comment_count: usize,
    pub span_count: usize,
    /// Spans per comment, over all comments.
    pub mean_spans_per_comment: Ratio,
    /// Spans per comment, over candy comments only.
    pub mean_spans_per_candy_comment: Ratio,
    pub overlapping_span_count: usize,
    pub overlapping_span_fraction: Ratio,
}

/// Number of spans in `spans` that share a character with another span of
/// the same list.
pub fn count_overlapping(spans: &[SpanAnnotation]) -> usize {
    let mut sorted: Vec<&SpanAnnotation> = spans.iter().filter(|s| !s.is_empty()).collect();
    sorted.sort();
    let mut count = 0;
    let mut max_end_before = 0usize;
    for (i, s) in sorted.iter().enumerate() {
        // Sorted by start, so the next span has the smallest start of all
        // later spans.
        let hits_earlier = i > 0 && max_end_before > s.start;
        let hits_later = sorted.get(i + 1).is_some_and(|n| n.start < s.end);
        if hits_earlier || hits_later {
            count += 1;
        }
        max_end_before = max_end_before.max(s.end);
    }
    count
}

pub fn corpus_stats(corpus: &[AnnotatedComment]) -> CorpusStats {
    let comment_count = corpus.len();
    let candy_comment_count = corpus.iter().filter(|ac| ac.is_candy).count();
    let span_count: usize = corpus.iter().map(|ac| ac.spans.len()).sum();
    let spans_in_candy: usize = corpus
        .iter()
        .filter(|ac| ac.is_candy)
        .map(|ac| ac.spans.len())
        .sum();
    let overlapping_span_count: usize = corpus.iter().map(|ac| count_overlapping(&ac.spans)).sum();

    CorpusStats {
        comment_count,
        candy_comment_count,
        span_count,
        mean_spans_per_comment: ratio_or_zero(span_count as u64, comment_count as u64),
        mean_spans_per_candy_comment: ratio_or_zero(
            spans_in_candy as u64,
            candy_comment_count as u64,
        ),
        overlapping_span_count,
        overlapping_span_fraction: ratio_or_zero(overlapping_span_count as u64, span_count as u64),
    }
}
