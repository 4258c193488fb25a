//! Character spans to token-level BIO tags and back.
//!
//! Tokens are supplied by the caller as [`TokenOffset`]s; the codec never
//! tokenizes text itself. Two decoders turn tag sequences into spans:
//!
//! * [`decode_basic`] keeps runs that open with a `B` tag and continue with
//!   `I` tags of the same type. Orphan `I` tags and `I` tags whose type does
//!   not match the running span are dropped.
//! * [`decode_extended`] applies the same rules, then repairs word
//!   boundaries in the same left-to-right pass so that no span starts or
//!   ends inside a word.
//!
//! # Encoding
//!
//! A token is tagged with a span when their character ranges intersect. When
//! a token intersects several spans it goes to the span covering most of its
//! characters; ties go to the span that comes first in `(start, end, type)`
//! order. Each span then tags its first token `B` and the rest `I`. A span
//! left without tokens is dropped, and its index is reported in
//! [`Encoded::dropped`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::{AnnotatedComment, CandyType, SpanAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagKind {
    O,
    B,
    I,
}

/// One of the 21 BIO labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    Outside,
    Begin(CandyType),
    Inside(CandyType),
}

/// Label names indexed by id: `O`, then `B-`/`I-` pairs in candy type order.
pub const LABELS: [&str; 21] = [
    "O",
    "B-positive_feedback",
    "I-positive_feedback",
    "B-compliment",
    "I-compliment",
    "B-affection_declaration",
    "I-affection_declaration",
    "B-encouragement",
    "I-encouragement",
    "B-gratitude",
    "I-gratitude",
    "B-agreement",
    "I-agreement",
    "B-ambiguous",
    "I-ambiguous",
    "B-implicit",
    "I-implicit",
    "B-group_membership",
    "I-group_membership",
    "B-sympathy",
    "I-sympathy",
];

/// The ordered label registry. Position is the integer label id.
pub fn label_registry() -> &'static [&'static str; 21] {
    &LABELS
}

impl BioTag {
    pub fn kind(self) -> TagKind {
        match self {
            BioTag::Outside => TagKind::O,
            BioTag::Begin(_) => TagKind::B,
            BioTag::Inside(_) => TagKind::I,
        }
    }

    pub fn candy_type(self) -> Option<CandyType> {
        match self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }

    pub fn id(self) -> usize {
        match self {
            BioTag::Outside => 0,
            BioTag::Begin(t) => 1 + 2 * t.index(),
            BioTag::Inside(t) => 2 + 2 * t.index(),
        }
    }

    pub fn from_id(id: usize) -> Option<BioTag> {
        match id {
            0 => Some(BioTag::Outside),
            1..=20 => {
                let t = CandyType::ALL[(id - 1) / 2];
                Some(if id % 2 == 1 {
                    BioTag::Begin(t)
                } else {
                    BioTag::Inside(t)
                })
            }
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        LABELS[self.id()]
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tag name `{0}`")]
pub struct UnknownTag(pub String);

impl FromStr for BioTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LABELS
            .iter()
            .position(|&l| l == s)
            .and_then(BioTag::from_id)
            .ok_or_else(|| UnknownTag(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenOffset {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// Set when the token continues the previous word (a `##en` piece).
    pub is_word_continuation: bool,
}

impl TokenOffset {
    pub fn new(index: usize, start: usize, end: usize, is_word_continuation: bool) -> Self {
        TokenOffset {
            index,
            start,
            end,
            is_word_continuation,
        }
    }

    /// Builds a token list from `(start, end, continuation)` triples.
    pub fn from_triples(triples: &[(usize, usize, bool)]) -> Vec<TokenOffset> {
        triples
            .iter()
            .enumerate()
            .map(|(i, &(s, e, c))| TokenOffset::new(i, s, e, c))
            .collect()
    }

    fn overlap(&self, span: &SpanAnnotation) -> usize {
        let lo = self.start.max(span.start);
        let hi = self.end.min(span.end);
        hi.saturating_sub(lo)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("token {index} has index field {found}")]
    TokenIndex { index: usize, found: usize },
    #[error("token {index} ({start}, {end}) is empty or inverted")]
    EmptyToken {
        index: usize,
        start: usize,
        end: usize,
    },
    #[error("token {index} starts at {start}, before the previous token ends at {prev_end}")]
    TokenOrder {
        index: usize,
        start: usize,
        prev_end: usize,
    },
    #[error("the first token is marked as a word continuation")]
    LeadingContinuation,
    #[error("token {index} ends at {end}, beyond the text length {len}")]
    TokenOutOfBounds {
        index: usize,
        end: usize,
        len: usize,
    },
    #[error("span #{index} ({start}, {end}) is empty or exceeds the text length {len}")]
    BadSpan {
        index: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{tokens} token(s) but {tags} tag(s)")]
    LengthMismatch { tokens: usize, tags: usize },
}

/// Checks index numbering, non-empty ranges, strict left-to-right order and
/// the leading-token flag. When `text_len` is given, also checks bounds.
pub fn validate_tokens(tokens: &[TokenOffset], text_len: Option<usize>) -> Result<(), CodecError> {
    let mut prev_end = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.index != i {
            return Err(CodecError::TokenIndex {
                index: i,
                found: t.index,
            });
        }
        if t.start >= t.end {
            return Err(CodecError::EmptyToken {
                index: i,
                start: t.start,
                end: t.end,
            });
        }
        if i > 0 && t.start < prev_end {
            return Err(CodecError::TokenOrder {
                index: i,
                start: t.start,
                prev_end,
            });
        }
        if let Some(len) = text_len {
            if t.end > len {
                return Err(CodecError::TokenOutOfBounds {
                    index: i,
                    end: t.end,
                    len,
                });
            }
        }
        prev_end = t.end;
    }
    if tokens.first().is_some_and(|t| t.is_word_continuation) {
        return Err(CodecError::LeadingContinuation);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSequence {
    pub document: String,
    pub comment_id: u64,
    pub tokens: Vec<TokenOffset>,
    pub tags: Vec<BioTag>,
}

impl TaggedSequence {
    pub fn new(
        document: impl Into<String>,
        comment_id: u64,
        tokens: Vec<TokenOffset>,
        tags: Vec<BioTag>,
    ) -> Result<Self, CodecError> {
        if tokens.len() != tags.len() {
            return Err(CodecError::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        Ok(TaggedSequence {
            document: document.into(),
            comment_id,
            tokens,
            tags,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub tags: Vec<BioTag>,
    /// Indices (into the input span slice) of spans that lost every token to
    /// an overlapping span.
    pub dropped: Vec<usize>,
}

/// Tags `tokens` with `spans` over a text of `text` (see the module docs for
/// the overlap policy).
pub fn encode_bio(
    text: &str,
    spans: &[SpanAnnotation],
    tokens: &[TokenOffset],
) -> Result<Encoded, CodecError> {
    let len = text.chars().count();
    validate_tokens(tokens, Some(len))?;
    for (i, s) in spans.iter().enumerate() {
        if s.start >= s.end || s.end > len {
            return Err(CodecError::BadSpan {
                index: i,
                start: s.start,
                end: s.end,
                len,
            });
        }
    }

    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| spans[i]);

    // owner[t] = position in `order` of the span that claims token t.
    let mut owner: Vec<Option<usize>> = alloc::vec![None; tokens.len()];
    for (t, tok) in tokens.iter().enumerate() {
        let mut best: Option<(usize, usize)> = None;
        for (rank, &si) in order.iter().enumerate() {
            let ov = tok.overlap(&spans[si]);
            if ov > 0 && best.is_none_or(|(_, b)| ov > b) {
                best = Some((rank, ov));
            }
        }
        owner[t] = best.map(|(rank, _)| rank);
    }

    let mut tags = alloc::vec![BioTag::Outside; tokens.len()];
    let mut opened = alloc::vec![false; order.len()];
    for (t, o) in owner.iter().enumerate() {
        if let Some(rank) = *o {
            let ty = spans[order[rank]].candy_type;
            tags[t] = if opened[rank] {
                BioTag::Inside(ty)
            } else {
                opened[rank] = true;
                BioTag::Begin(ty)
            };
        }
    }

    let mut dropped: Vec<usize> = order
        .iter()
        .zip(&opened)
        .filter_map(|(&si, &o)| (!o).then_some(si))
        .collect();
    dropped.sort_unstable();
    Ok(Encoded { tags, dropped })
}

/// Encodes one annotated comment. Returns the tagged sequence and the indices
/// of dropped spans.
pub fn encode_comment(
    ac: &AnnotatedComment,
    tokens: Vec<TokenOffset>,
) -> Result<(TaggedSequence, Vec<usize>), CodecError> {
    let Encoded { tags, dropped } = encode_bio(&ac.comment.text, &ac.spans, &tokens)?;
    let seq = TaggedSequence::new(
        ac.comment.document.clone(),
        ac.comment.comment_id,
        tokens,
        tags,
    )?;
    Ok((seq, dropped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Postprocessing {
    Basic,
    Extended,
}

impl Postprocessing {
    pub fn as_str(self) -> &'static str {
        match self {
            Postprocessing::Basic => "basic",
            Postprocessing::Extended => "extended",
        }
    }
}

impl FromStr for Postprocessing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Postprocessing::Basic),
            "extended" => Ok(Postprocessing::Extended),
            other => Err(alloc::format!(
                "unknown postprocessing `{other}` (expected basic or extended)"
            )),
        }
    }
}

/// A word-boundary repair made by [`decode_extended_logged`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repair {
    /// A continuation token was pulled into the running span although its
    /// own tag was `tag`.
    Absorbed { token: usize, tag: BioTag },
    /// A `B` tag on a continuation token opened a span whose start was moved
    /// back to the first token of the word.
    StartMoved { token: usize, word_start: usize },
    /// A `B` tag on a continuation token was merged into the span that ends
    /// right before its word, because the word's earlier tokens carry tags.
    Merged { token: usize },
}

struct Run {
    first: usize,
    last: usize,
    ty: CandyType,
}

fn word_start(tokens: &[TokenOffset], mut i: usize) -> usize {
    while i > 0 && tokens[i].is_word_continuation {
        i -= 1;
    }
    i
}

fn scan(seq: &TaggedSequence, extended: bool, log: &mut Vec<Repair>) -> Vec<SpanAnnotation> {
    let tokens = &seq.tokens;
    let n = tokens.len().min(seq.tags.len());
    let mut done: Vec<Run> = Vec::new();
    let mut open: Option<Run> = None;

    for i in 0..n {
        let tag = seq.tags[i];
        let continuation = extended && tokens[i].is_word_continuation;

        if continuation {
            if let Some(run) = open.as_mut() {
                if tag != BioTag::Inside(run.ty) {
                    log.push(Repair::Absorbed { token: i, tag });
                }
                run.last = i;
                continue;
            }
        }

        match tag {
            BioTag::Inside(t) if open.as_ref().is_some_and(|r| r.ty == t) => {
                if let Some(run) = open.as_mut() {
                    run.last = i;
                }
            }
            BioTag::Begin(t) => {
                done.extend(open.take());
                if !continuation {
                    open = Some(Run {
                        first: i,
                        last: i,
                        ty: t,
                    });
                    continue;
                }
                // No span is running into this word (it would have absorbed
                // the token), so the word's earlier tokens are outside spans.
                let ws = word_start(tokens, i);
                let earlier_tagged = seq.tags[ws..i].iter().any(|&g| g != BioTag::Outside);
                let adjacent_prev = ws > 0 && done.last().is_some_and(|r| r.last + 1 == ws);
                if earlier_tagged && adjacent_prev {
                    let mut run = done.pop().expect("checked above");
                    run.last = i;
                    log.push(Repair::Merged { token: i });
                    open = Some(run);
                } else {
                    log.push(Repair::StartMoved {
                        token: i,
                        word_start: ws,
                    });
                    open = Some(Run {
                        first: ws,
                        last: i,
                        ty: t,
                    });
                }
            }
            // O, orphan I, or I of another type: the running span ends and
            // the token is not part of any span.
            _ => done.extend(open.take()),
        }
    }
    done.extend(open);

    let mut spans: Vec<SpanAnnotation> = done
        .into_iter()
        .map(|r| SpanAnnotation::new(tokens[r.first].start, tokens[r.last].end, r.ty))
        .collect();
    spans.sort();
    spans
}

pub fn decode_basic(seq: &TaggedSequence) -> Vec<SpanAnnotation> {
    scan(seq, false, &mut Vec::new())
}

pub fn decode_extended(seq: &TaggedSequence) -> Vec<SpanAnnotation> {
    scan(seq, true, &mut Vec::new())
}

/// [`decode_extended`] plus the list of boundary repairs it made.
pub fn decode_extended_logged(seq: &TaggedSequence) -> (Vec<SpanAnnotation>, Vec<Repair>) {
    let mut log = Vec::new();
    let spans = scan(seq, true, &mut log);
    (spans, log)
}

pub fn decode(seq: &TaggedSequence, mode: Postprocessing) -> Vec<SpanAnnotation> {
    match mode {
        Postprocessing::Basic => decode_basic(seq),
        Postprocessing::Extended => decode_extended(seq),
    }
}
