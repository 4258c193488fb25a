//! Structured (JSON lines) and tabular renderings of reports.

use std::io::{self, Write};

use candyspan_core::corpus::{DedupReport, Violation};
use candyspan_core::metrics::format_ratio;
use candyspan_core::{CorpusStats, EvalReport, Ratio, Scores};
use serde::Serialize;

/// Decimal places used for every rendered ratio.
pub const PLACES: u32 = 4;

pub fn decimal(r: Ratio) -> String {
    format_ratio(r, PLACES)
}

pub fn exact(r: Ratio) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// A structured record with the fields `code`, `document`, `comment_id` and
/// `message`, used for violations and warnings alike.
#[derive(Debug, Serialize)]
pub struct Notice<'a> {
    pub code: &'a str,
    pub document: &'a str,
    pub comment_id: u64,
    pub message: &'a str,
}

impl<'a> From<&'a Violation> for Notice<'a> {
    fn from(v: &'a Violation) -> Self {
        Notice {
            code: v.code.as_str(),
            document: &v.document,
            comment_id: v.comment_id,
            message: &v.message,
        }
    }
}

pub fn write_jsonl<W: Write + ?Sized, T: Serialize>(w: &mut W, record: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")
}

#[derive(Debug, Serialize)]
pub struct ScoreRecord {
    pub scope: String,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: String,
    pub recall: String,
    pub f1: String,
    pub precision_exact: String,
    pub recall_exact: String,
    pub f1_exact: String,
}

impl ScoreRecord {
    pub fn new(scope: &str, s: &Scores) -> Self {
        ScoreRecord {
            scope: scope.to_string(),
            true_positives: s.true_positives,
            false_positives: s.false_positives,
            false_negatives: s.false_negatives,
            precision: decimal(s.precision),
            recall: decimal(s.recall),
            f1: decimal(s.f1),
            precision_exact: exact(s.precision),
            recall_exact: exact(s.recall),
            f1_exact: exact(s.f1),
        }
    }
}

/// Overall first, then one record per candy type.
pub fn span_records(report: &EvalReport) -> Vec<ScoreRecord> {
    std::iter::once(ScoreRecord::new("overall", &report.overall))
        .chain(
            report
                .per_type
                .iter()
                .map(|(t, s)| ScoreRecord::new(t.name(), s)),
        )
        .collect()
}

pub fn write_table<W: Write + ?Sized>(w: &mut W, records: &[ScoreRecord]) -> io::Result<()> {
    writeln!(
        w,
        "{:<22} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9}",
        "scope", "tp", "fp", "fn", "precision", "recall", "f1"
    )?;
    for r in records {
        writeln!(
            w,
            "{:<22} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9}",
            r.scope,
            r.true_positives,
            r.false_positives,
            r.false_negatives,
            r.precision,
            r.recall,
            r.f1
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct StatsRecord {
    pub comment_count: usize,
    pub candy_comment_count: usize,
    pub span_count: usize,
    pub mean_spans_per_comment: String,
    pub mean_spans_per_candy_comment: String,
    pub overlapping_span_count: usize,
    pub overlapping_span_fraction: String,
}

impl From<&CorpusStats> for StatsRecord {
    fn from(s: &CorpusStats) -> Self {
        StatsRecord {
            comment_count: s.comment_count,
            candy_comment_count: s.candy_comment_count,
            span_count: s.span_count,
            mean_spans_per_comment: decimal(s.mean_spans_per_comment),
            mean_spans_per_candy_comment: decimal(s.mean_spans_per_candy_comment),
            overlapping_span_count: s.overlapping_span_count,
            overlapping_span_fraction: decimal(s.overlapping_span_fraction),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DedupRecord<'a> {
    pub removed_count: usize,
    pub removed_group_count: usize,
    pub conflict_group_count: usize,
    pub conflict_comment_count: usize,
    pub conflicts: Vec<ConflictRecord<'a>>,
}

#[derive(Debug, Serialize)]
pub struct ConflictRecord<'a> {
    pub text: &'a str,
    pub comments: Vec<(&'a str, u64)>,
}

impl<'a> From<&'a DedupReport> for DedupRecord<'a> {
    fn from(r: &'a DedupReport) -> Self {
        DedupRecord {
            removed_count: r.removed_count,
            removed_group_count: r.removed_group_count,
            conflict_group_count: r.retained_conflicts.len(),
            conflict_comment_count: r.conflict_comment_count(),
            conflicts: r
                .retained_conflicts
                .iter()
                .map(|g| ConflictRecord {
                    text: &g.text,
                    comments: g
                        .keys
                        .iter()
                        .map(|k| (k.document.as_str(), k.comment_id))
                        .collect(),
                })
                .collect(),
        }
    }
}
