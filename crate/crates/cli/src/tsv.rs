//! Tab-separated corpus files.
//!
//! | file     | header                                        |
//! |----------|-----------------------------------------------|
//! | comments | `document  comment_id  comment`               |
//! | labels   | `document  comment_id  flausch` (`yes`/`no`)  |
//! | spans    | `document  comment_id  type  start  end`      |
//! | folds    | `document  comment_id  fold`                  |
//!
//! Comment text escapes backslash, tab, newline and carriage return as
//! `\\`, `\t`, `\n` and `\r`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use candyspan_core::metrics::BinaryLabels;
use candyspan_core::splitting::{FoldAssignment, Replica};
use candyspan_core::{AnnotatedComment, CandyType, Comment, CommentKey, SpanAnnotation, SpanIndex};

pub const COMMENTS_HEADER: [&str; 3] = ["document", "comment_id", "comment"];
pub const LABELS_HEADER: [&str; 3] = ["document", "comment_id", "flausch"];
pub const SPANS_HEADER: [&str; 5] = ["document", "comment_id", "type", "start", "end"];
pub const FOLDS_HEADER: [&str; 3] = ["document", "comment_id", "fold"];
pub const HOLDOUT_HEADER: [&str; 3] = ["document", "comment_id", "part"];
pub const REPLICAS_HEADER: [&str; 3] = ["document", "comment_id", "replica"];

#[derive(Debug, thiserror::Error)]
pub enum RowError {
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("expected {expected} columns, found {found}")]
    ColumnCount { expected: usize, found: usize },
    #[error("column `{column}`: `{value}` is not a non-negative integer")]
    BadInteger { column: &'static str, value: String },
    #[error(transparent)]
    UnknownCandyType(#[from] candyspan_core::corpus::UnknownCandyType),
    #[error("flausch must be `yes` or `no`, found `{0}`")]
    BadFlag(String),
    #[error("span ({start}, {end}) exceeds the text length {len} of comment {key}")]
    SpanOutOfBounds {
        key: CommentKey,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("duplicate comment {0}")]
    DuplicateKey(CommentKey),
    #[error("comment {0} is not in the comments file")]
    UnknownComment(CommentKey),
    #[error("comment {0} has no label row")]
    MissingLabel(CommentKey),
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{file}:{line}: {source}")]
    Row {
        file: String,
        line: usize,
        source: RowError,
    },
}

impl FormatError {
    fn row(file: &str, line: usize, source: RowError) -> Self {
        FormatError::Row {
            file: file.to_string(),
            line,
            source,
        }
    }
}

/// Reads a whole file, or standard input for `-`.
pub fn read_source(path: &Path) -> Result<String, FormatError> {
    let io_err = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(io_err)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(io_err)
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape`]. Unknown escapes are kept verbatim.
pub fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Data rows of a TSV source as `(line number, fields)`, after checking the
/// header and the column count.
fn rows<'a>(
    src: &'a str,
    file: &str,
    header: &[&str],
) -> Result<Vec<(usize, Vec<&'a str>)>, FormatError> {
    let src = src.strip_prefix('\u{feff}').unwrap_or(src);
    let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l));
    let expected = header.join("\t");
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == expected => {}
        Some((n, h)) => {
            return Err(FormatError::row(
                file,
                n,
                RowError::Header {
                    expected,
                    found: h.to_string(),
                },
            ))
        }
        None => {
            return Err(FormatError::row(
                file,
                1,
                RowError::Header {
                    expected,
                    found: String::new(),
                },
            ))
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(FormatError::row(
                file,
                n,
                RowError::ColumnCount {
                    expected: header.len(),
                    found: fields.len(),
                },
            ));
        }
        out.push((n, fields));
    }
    Ok(out)
}

fn int<T: std::str::FromStr>(
    file: &str,
    line: usize,
    column: &'static str,
    value: &str,
) -> Result<T, FormatError> {
    value.parse().map_err(|_| {
        FormatError::row(
            file,
            line,
            RowError::BadInteger {
                column,
                value: value.to_string(),
            },
        )
    })
}

/// Parses a comments file. Keys must be unique.
pub fn read_comments(src: &str, file: &str) -> Result<Vec<(usize, Comment)>, FormatError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, f) in rows(src, file, &COMMENTS_HEADER)? {
        let id: u64 = int(file, n, "comment_id", f[1])?;
        let comment = Comment::new(f[0], id, unescape(f[2]));
        if !seen.insert(comment.key()) {
            return Err(FormatError::row(
                file,
                n,
                RowError::DuplicateKey(comment.key()),
            ));
        }
        out.push((n, comment));
    }
    Ok(out)
}

/// Parses a labels file into per-comment flags with their line numbers.
pub fn read_labels(
    src: &str,
    file: &str,
) -> Result<BTreeMap<CommentKey, (usize, bool)>, FormatError> {
    let mut out = BTreeMap::new();
    for (n, f) in rows(src, file, &LABELS_HEADER)? {
        let key = CommentKey::new(f[0], int(file, n, "comment_id", f[1])?);
        let flag = match f[2] {
            "yes" => true,
            "no" => false,
            other => return Err(FormatError::row(file, n, RowError::BadFlag(other.into()))),
        };
        if out.insert(key.clone(), (n, flag)).is_some() {
            return Err(FormatError::row(file, n, RowError::DuplicateKey(key)));
        }
    }
    Ok(out)
}

pub fn labels_only(labels: BTreeMap<CommentKey, (usize, bool)>) -> BinaryLabels {
    labels.into_iter().map(|(k, (_, v))| (k, v)).collect()
}

/// Parses a spans file as `(line, key, span)` rows in file order.
pub fn read_spans(
    src: &str,
    file: &str,
) -> Result<Vec<(usize, CommentKey, SpanAnnotation)>, FormatError> {
    let mut out = Vec::new();
    for (n, f) in rows(src, file, &SPANS_HEADER)? {
        let key = CommentKey::new(f[0], int(file, n, "comment_id", f[1])?);
        let ty: CandyType = f[2]
            .parse()
            .map_err(|e| FormatError::row(file, n, RowError::UnknownCandyType(e)))?;
        let start = int(file, n, "start", f[3])?;
        let end = int(file, n, "end", f[4])?;
        out.push((n, key, SpanAnnotation::new(start, end, ty)));
    }
    Ok(out)
}

/// Spans grouped per comment, each list sorted.
pub fn span_index(rows: Vec<(usize, CommentKey, SpanAnnotation)>) -> SpanIndex {
    let mut ix = SpanIndex::new();
    for (_, key, span) in rows {
        ix.entry(key).or_default().push(span);
    }
    for spans in ix.values_mut() {
        spans.sort();
    }
    ix
}

/// Joins comment, label and span sources into a corpus in comment-file
/// order. Without labels, a comment is candy when it has spans.
pub fn parse_corpus_str(
    comments: (&str, &str),
    labels: Option<(&str, &str)>,
    spans: Option<(&str, &str)>,
) -> Result<Vec<AnnotatedComment>, FormatError> {
    let (src, file) = comments;
    let comments = read_comments(src, file)?;
    let index: BTreeMap<CommentKey, usize> = comments
        .iter()
        .enumerate()
        .map(|(i, (_, c))| (c.key(), i))
        .collect();

    let mut per_comment: Vec<Vec<SpanAnnotation>> = vec![Vec::new(); comments.len()];
    if let Some((src, sfile)) = spans {
        for (n, key, span) in read_spans(src, sfile)? {
            let Some(&i) = index.get(&key) else {
                return Err(FormatError::row(sfile, n, RowError::UnknownComment(key)));
            };
            let len = comments[i].1.char_len();
            if span.start > len || span.end > len {
                return Err(FormatError::row(
                    sfile,
                    n,
                    RowError::SpanOutOfBounds {
                        key,
                        start: span.start,
                        end: span.end,
                        len,
                    },
                ));
            }
            per_comment[i].push(span);
        }
    }

    let flags = match labels {
        Some((src, lfile)) => {
            let parsed = read_labels(src, lfile)?;
            if let Some((key, &(n, _))) = parsed.iter().find(|(k, _)| !index.contains_key(*k)) {
                return Err(FormatError::row(
                    lfile,
                    n,
                    RowError::UnknownComment(key.clone()),
                ));
            }
            let mut flags = Vec::with_capacity(comments.len());
            for (n, c) in &comments {
                match parsed.get(&c.key()) {
                    Some(&(_, flag)) => flags.push(Some(flag)),
                    None => {
                        return Err(FormatError::row(file, *n, RowError::MissingLabel(c.key())))
                    }
                }
            }
            flags
        }
        None => vec![None; comments.len()],
    };

    Ok(comments
        .into_iter()
        .zip(per_comment)
        .zip(flags)
        .map(|(((_, c), spans), flag)| match flag {
            Some(is_candy) => AnnotatedComment::new(c, is_candy, spans),
            None => AnnotatedComment::from_spans(c, spans),
        })
        .collect())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// File-based [`parse_corpus_str`]. Error messages name each file by path.
pub fn parse_corpus(
    comments: &Path,
    labels: Option<&Path>,
    spans: Option<&Path>,
) -> Result<Vec<AnnotatedComment>, FormatError> {
    let c = read_source(comments)?;
    let l = labels.map(read_source).transpose()?;
    let s = spans.map(read_source).transpose()?;
    let (cn, ln, sn) = (
        display(comments),
        labels.map(display).unwrap_or_default(),
        spans.map(display).unwrap_or_default(),
    );
    parse_corpus_str(
        (&c, &cn),
        l.as_deref().map(|l| (l, ln.as_str())),
        s.as_deref().map(|s| (s, sn.as_str())),
    )
}

pub fn read_span_file(path: &Path) -> Result<SpanIndex, FormatError> {
    let src = read_source(path)?;
    Ok(span_index(read_spans(&src, &display(path))?))
}

pub fn read_label_file(path: &Path) -> Result<BinaryLabels, FormatError> {
    let src = read_source(path)?;
    Ok(labels_only(read_labels(&src, &display(path))?))
}

pub fn write_comments<'a, W: Write + ?Sized>(
    w: &mut W,
    comments: impl IntoIterator<Item = &'a Comment>,
) -> io::Result<()> {
    writeln!(w, "{}", COMMENTS_HEADER.join("\t"))?;
    for c in comments {
        writeln!(w, "{}\t{}\t{}", c.document, c.comment_id, escape(&c.text))?;
    }
    Ok(())
}

pub fn write_labels<'a, W: Write + ?Sized>(
    w: &mut W,
    labels: impl IntoIterator<Item = (&'a CommentKey, bool)>,
) -> io::Result<()> {
    writeln!(w, "{}", LABELS_HEADER.join("\t"))?;
    for (k, flag) in labels {
        let flag = if flag { "yes" } else { "no" };
        writeln!(w, "{}\t{}\t{}", k.document, k.comment_id, flag)?;
    }
    Ok(())
}

pub fn write_spans<'a, W: Write + ?Sized>(
    w: &mut W,
    spans: impl IntoIterator<Item = (&'a CommentKey, &'a SpanAnnotation)>,
) -> io::Result<()> {
    writeln!(w, "{}", SPANS_HEADER.join("\t"))?;
    for (k, s) in spans {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            k.document,
            k.comment_id,
            s.candy_type.label(),
            s.start,
            s.end
        )?;
    }
    Ok(())
}

/// Writes the three corpus files.
pub fn write_corpus<W: Write + ?Sized>(
    corpus: &[AnnotatedComment],
    comments: &mut W,
    labels: &mut W,
    spans: &mut W,
) -> io::Result<()> {
    write_comments(comments, corpus.iter().map(|ac| &ac.comment))?;
    let keys: Vec<CommentKey> = corpus.iter().map(AnnotatedComment::key).collect();
    write_labels(
        labels,
        keys.iter().zip(corpus).map(|(k, ac)| (k, ac.is_candy)),
    )?;
    write_spans(
        spans,
        keys.iter()
            .zip(corpus)
            .flat_map(|(k, ac)| ac.spans.iter().map(move |s| (k, s))),
    )
}

pub fn write_folds<W: Write + ?Sized>(w: &mut W, folds: &FoldAssignment) -> io::Result<()> {
    writeln!(w, "{}", FOLDS_HEADER.join("\t"))?;
    for (k, f) in &folds.assignment {
        writeln!(w, "{}\t{}\t{}", k.document, k.comment_id, f)?;
    }
    Ok(())
}

pub fn read_folds(src: &str, file: &str) -> Result<FoldAssignment, FormatError> {
    let mut assignment = BTreeMap::new();
    let mut max = 0;
    for (n, f) in rows(src, file, &FOLDS_HEADER)? {
        let key = CommentKey::new(f[0], int(file, n, "comment_id", f[1])?);
        let fold: usize = int(file, n, "fold", f[2])?;
        max = max.max(fold);
        if assignment.insert(key.clone(), fold).is_some() {
            return Err(FormatError::row(file, n, RowError::DuplicateKey(key)));
        }
    }
    Ok(FoldAssignment {
        fold_count: if assignment.is_empty() { 0 } else { max + 1 },
        assignment,
    })
}

pub fn write_holdout<W: Write + ?Sized>(
    w: &mut W,
    train: &[AnnotatedComment],
    holdout: &[AnnotatedComment],
) -> io::Result<()> {
    writeln!(w, "{}", HOLDOUT_HEADER.join("\t"))?;
    let mut rows: Vec<(CommentKey, &str)> = train
        .iter()
        .map(|ac| (ac.key(), "train"))
        .chain(holdout.iter().map(|ac| (ac.key(), "holdout")))
        .collect();
    rows.sort();
    for (k, part) in rows {
        writeln!(w, "{}\t{}\t{}", k.document, k.comment_id, part)?;
    }
    Ok(())
}

pub fn write_replicas<W: Write + ?Sized>(w: &mut W, replicas: &[Replica]) -> io::Result<()> {
    writeln!(w, "{}", REPLICAS_HEADER.join("\t"))?;
    for r in replicas {
        let c = &r.comment.comment;
        writeln!(w, "{}\t{}\t{}", c.document, c.comment_id, r.replica)?;
    }
    Ok(())
}
