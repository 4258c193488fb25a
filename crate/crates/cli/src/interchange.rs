//! Line-delimited token/tag records exchanged with external taggers.
//!
//! One JSON object per line and per comment:
//!
//! ```json
//! {"document":"NDY-252","comment_id":195,"tokens":[[0,5,false],[6,12,false]],"tags":["B-gratitude","I-gratitude"]}
//! ```
//!
//! `tokens` holds `[start, end, is_word_continuation]` in character offsets.
//! `tags` uses the label registry names and may be omitted or empty on input
//! that has not been tagged yet.

use std::io::{self, Write};
use std::path::Path;

use candyspan_core::biocodec::{validate_tokens, CodecError, UnknownTag};
use candyspan_core::{BioTag, CommentKey, TaggedSequence, TokenOffset};
use serde::{Deserialize, Serialize};

use crate::tsv::{read_source, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub document: String,
    pub comment_id: u64,
    pub tokens: Vec<(usize, usize, bool)>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum InterchangeError {
    #[error(transparent)]
    Source(#[from] FormatError),
    #[error("{file}:{line}: {source}")]
    Json {
        file: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{file}:{line}: {source}")]
    Tag {
        file: String,
        line: usize,
        source: UnknownTag,
    },
    #[error("{file}:{line}: {source}")]
    Tokens {
        file: String,
        line: usize,
        source: CodecError,
    },
    #[error("{file}:{line}: duplicate record for comment {key}")]
    Duplicate {
        file: String,
        line: usize,
        key: CommentKey,
    },
}

impl Record {
    pub fn key(&self) -> CommentKey {
        CommentKey::new(self.document.clone(), self.comment_id)
    }

    pub fn token_offsets(&self) -> Vec<TokenOffset> {
        TokenOffset::from_triples(&self.tokens)
    }

    pub fn from_sequence(seq: &TaggedSequence) -> Self {
        Record {
            document: seq.document.clone(),
            comment_id: seq.comment_id,
            tokens: seq
                .tokens
                .iter()
                .map(|t| (t.start, t.end, t.is_word_continuation))
                .collect(),
            tags: seq.tags.iter().map(|t| t.name().to_string()).collect(),
        }
    }
}

/// A parsed record with its source line.
#[derive(Debug, Clone)]
pub struct Entry {
    pub line: usize,
    pub record: Record,
}

impl Entry {
    fn err_tokens(&self, file: &str, source: CodecError) -> InterchangeError {
        InterchangeError::Tokens {
            file: file.to_string(),
            line: self.line,
            source,
        }
    }

    /// Validated token offsets (tags are not looked at).
    pub fn tokens(&self, file: &str) -> Result<Vec<TokenOffset>, InterchangeError> {
        let tokens = self.record.token_offsets();
        validate_tokens(&tokens, None).map_err(|e| self.err_tokens(file, e))?;
        Ok(tokens)
    }

    /// Validated tagged sequence. Unknown tag names are rejected.
    pub fn tagged(&self, file: &str) -> Result<TaggedSequence, InterchangeError> {
        let tokens = self.tokens(file)?;
        let tags = self
            .record
            .tags
            .iter()
            .map(|t| t.parse::<BioTag>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| InterchangeError::Tag {
                file: file.to_string(),
                line: self.line,
                source,
            })?;
        TaggedSequence::new(
            self.record.document.clone(),
            self.record.comment_id,
            tokens,
            tags,
        )
        .map_err(|e| self.err_tokens(file, e))
    }
}

pub fn parse_str(src: &str, file: &str) -> Result<Vec<Entry>, InterchangeError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(line).map_err(|source| InterchangeError::Json {
                file: file.to_string(),
                line: i + 1,
                source,
            })?;
        if !seen.insert(record.key()) {
            return Err(InterchangeError::Duplicate {
                file: file.to_string(),
                line: i + 1,
                key: record.key(),
            });
        }
        out.push(Entry {
            line: i + 1,
            record,
        });
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<Entry>, InterchangeError> {
    let src = read_source(path)?;
    parse_str(&src, &path.display().to_string())
}

/// Reads and validates every record as a tagged sequence.
pub fn read_tagged(path: &Path) -> Result<Vec<TaggedSequence>, InterchangeError> {
    let file = path.display().to_string();
    read(path)?.iter().map(|e| e.tagged(&file)).collect()
}

pub fn write<'a, W: Write + ?Sized>(
    w: &mut W,
    records: impl IntoIterator<Item = &'a Record>,
) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
