//! Non-neural pipeline for candy-speech span detection.
//!
//! This crate holds the pure parts of the pipeline: corpus types with
//! validation, deduplication and statistics ([`corpus`]), stratified folds,
//! holdouts and oversampling ([`splitting`]), conversion between character
//! spans and token-level BIO tags ([`biocodec`]), and strict span / positive
//! class scoring ([`metrics`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the
//! interchange format and the command-line front-end live in the `candyspan`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod biocodec;
pub mod corpus;
pub mod metrics;
pub mod splitting;

pub use biocodec::{BioTag, Encoded, TagKind, TaggedSequence, TokenOffset};
pub use corpus::{
    AnnotatedComment, CandyType, Comment, CommentKey, CorpusStats, DedupReport, SpanAnnotation,
    Violation, ViolationCode,
};
pub use metrics::{Counts, EvalReport, Scores, SpanIndex};
pub use splitting::{FoldAssignment, StratifyMode, StratumKey};

/// Exact non-negative rational used for every reported ratio.
pub type Ratio = num_rational::Ratio<u64>;

/// `num / den`, or zero when `den == 0`.
pub(crate) fn ratio_or_zero(num: u64, den: u64) -> Ratio {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}
