//! The `candyspan` command line.
//!
//! Exit codes: 0 on success, 1 on data errors (unreadable or malformed
//! input, failed validation, infeasible splits), 2 on usage errors.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use candyspan_core::biocodec::{self, decode, encode_comment, Postprocessing, Repair};
use candyspan_core::corpus::{corpus_stats, deduplicate, validate};
use candyspan_core::metrics::{derive_binary, positive_f1, strict_span_f1};
use candyspan_core::splitting::{holdout_split, make_folds, oversample_binary, StratifyMode};
use candyspan_core::{AnnotatedComment, CommentKey, SpanIndex};
use clap::{Args, Parser, Subcommand};

use crate::report::{self, Notice, ScoreRecord};
use crate::{interchange, tsv};

#[derive(Debug, Parser)]
#[command(
    name = "candyspan",
    version,
    about = "Candy-speech corpus, BIO codec and scoring toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Comments TSV (`-` for standard input).
    #[arg(long)]
    comments: PathBuf,
    /// Labels TSV. Without it, a comment is candy when it has spans.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Spans TSV.
    #[arg(long)]
    spans: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if f > 0.0 && f < 1.0 {
        Ok(f)
    } else {
        Err(format!(
            "fraction must lie strictly between 0 and 1, got {s}"
        ))
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report every invariant violation as JSON lines.
    Validate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Drop duplicate comments and write the cleaned corpus into a directory.
    Dedup {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Directory receiving comments.tsv, labels.tsv and spans.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus summary statistics.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Stratified k-fold assignment.
    Split {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
        k: u32,
        /// Stratum key: binary or first_span_type.
        #[arg(long, default_value = "binary")]
        mode: StratifyMode,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Stratified train/holdout split.
    Holdout {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "0.1", value_parser = parse_fraction)]
        fraction: f64,
        #[arg(long, default_value = "binary")]
        mode: StratifyMode,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Oversample candy comments to a 1:1 ratio; writes the replica list.
    Oversample {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Tag tokenized comments with their spans.
    Encode {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Interchange file holding the token offsets.
        #[arg(long)]
        tokens: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Turn predicted tags into a spans TSV.
    Decode {
        /// Interchange file with predicted tags.
        #[arg(long)]
        tokens: PathBuf,
        /// Postprocessing: basic or extended.
        #[arg(long, default_value = "basic")]
        mode: Postprocessing,
        #[command(flatten)]
        out: OutArg,
    },
    /// Strict span precision/recall/F1.
    ScoreSpans {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Comments TSV listing every scored comment; enables unknown-comment
        /// warnings.
        #[arg(long)]
        comments: Option<PathBuf>,
        /// JSON-lines report destination (the table always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Positive-class precision/recall/F1 on labels files.
    ScoreBinary {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// JSON-lines report destination (the table always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive comment labels from predicted spans.
    DeriveBinary {
        /// Predicted spans TSV.
        #[arg(long)]
        pred: PathBuf,
        /// Comments TSV providing the comments to label.
        #[arg(long, required_unless_present = "tokens")]
        comments: Option<PathBuf>,
        /// Interchange file providing the comments to label.
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

/// The settings a run resolved to, printed on standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub fold_count: u32,
    pub holdout_fraction: f64,
    pub stratify_mode: StratifyMode,
    pub postprocessing: Postprocessing,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            fold_count: 5,
            holdout_fraction: 0.10,
            stratify_mode: StratifyMode::Binary,
            postprocessing: Postprocessing::Basic,
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "fold_count": self.fold_count,
            "holdout_fraction": self.holdout_fraction,
            "stratify_mode": self.stratify_mode.as_str(),
            "postprocessing": self.postprocessing.as_str(),
        })
    }
}

impl Command {
    fn config(&self) -> RunConfig {
        let mut c = RunConfig::default();
        match self {
            Command::Split { k, mode, seed, .. } => {
                c.fold_count = *k;
                c.stratify_mode = *mode;
                c.seed = *seed;
            }
            Command::Holdout {
                fraction,
                mode,
                seed,
                ..
            } => {
                c.holdout_fraction = *fraction;
                c.stratify_mode = *mode;
                c.seed = *seed;
            }
            Command::Oversample { seed, .. } => c.seed = *seed,
            Command::Decode { mode, .. } => c.postprocessing = *mode,
            _ => {}
        }
        c
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Standard output and error of a run. Kept abstract so tests can capture
/// them.
struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    /// Runs `body` against the `--out` file, or standard output.
    fn with_out(
        &mut self,
        out: Option<&Path>,
        body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> Outcome {
        match out {
            Some(p) if p.as_os_str() != "-" => {
                let f =
                    File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
                let mut w = BufWriter::new(f);
                body(&mut w)?;
                w.flush()?;
            }
            _ => body(&mut *self.stdout)?,
        }
        Ok(())
    }

    fn notice(&mut self, code: &str, key: &CommentKey, message: &str) -> io::Result<()> {
        report::write_jsonl(
            &mut *self.stderr,
            &Notice {
                code,
                document: &key.document,
                comment_id: key.comment_id,
                message,
            },
        )
    }
}

fn load(corpus: &CorpusArgs) -> Result<Vec<AnnotatedComment>, Failure> {
    Ok(tsv::parse_corpus(
        &corpus.comments,
        corpus.labels.as_deref(),
        corpus.spans.as_deref(),
    )?)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };

    let config = cli.command.config();
    let _ = writeln!(
        stderr,
        "{}",
        serde_json::json!({ "config": config.to_json() })
    );

    let mut io = Io { stdout, stderr };
    let result = dispatch(cli.command, &mut io);
    let _ = io.stdout.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Data(msg)) => {
            let _ = writeln!(io.stderr, "error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(io.stderr, "usage error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command, io: &mut Io<'_>) -> Outcome {
    match command {
        Command::Validate { corpus, out } => {
            let corpus = load(&corpus)?;
            let violations = validate(&corpus);
            io.with_out(out.out.as_deref(), |w| {
                for v in &violations {
                    report::write_jsonl(w, &Notice::from(v))?;
                }
                Ok(())
            })?;
            if violations.is_empty() {
                Ok(())
            } else {
                Err(Failure::Data(format!(
                    "{} violation(s) found",
                    violations.len()
                )))
            }
        }

        Command::Dedup { corpus, out } => {
            let corpus = load(&corpus)?;
            let (kept, rep) = deduplicate(corpus);
            fs::create_dir_all(&out)
                .map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
            let create = |name: &str| {
                let p = out.join(name);
                File::create(&p)
                    .map(BufWriter::new)
                    .map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
            };
            let (mut c, mut l, mut s) = (
                create("comments.tsv")?,
                create("labels.tsv")?,
                create("spans.tsv")?,
            );
            tsv::write_corpus(&kept, &mut c, &mut l, &mut s)?;
            for w in [&mut c, &mut l, &mut s] {
                w.flush()?;
            }
            report::write_jsonl(io.stdout, &report::DedupRecord::from(&rep))?;
            Ok(())
        }

        Command::Stats { corpus, out } => {
            let stats = corpus_stats(&load(&corpus)?);
            io.with_out(out.out.as_deref(), |w| {
                report::write_jsonl(w, &report::StatsRecord::from(&stats))
            })
        }

        Command::Split {
            corpus,
            k,
            mode,
            seed,
            out,
        } => {
            let folds = make_folds(&load(&corpus)?, k as usize, mode, seed)?;
            io.with_out(out.out.as_deref(), |w| tsv::write_folds(w, &folds))
        }

        Command::Holdout {
            corpus,
            fraction,
            mode,
            seed,
            out,
        } => {
            let (train, holdout) = holdout_split(&load(&corpus)?, fraction, mode, seed)?;
            io.with_out(out.out.as_deref(), |w| {
                tsv::write_holdout(w, &train, &holdout)
            })
        }

        Command::Oversample { corpus, seed, out } => {
            let replicas = oversample_binary(&load(&corpus)?, seed)?;
            io.with_out(out.out.as_deref(), |w| tsv::write_replicas(w, &replicas))
        }

        Command::Encode {
            corpus,
            tokens,
            out,
        } => {
            let corpus = load(&corpus)?;
            let by_key: std::collections::BTreeMap<CommentKey, &AnnotatedComment> =
                corpus.iter().map(|ac| (ac.key(), ac)).collect();
            let file = tokens.display().to_string();
            let mut records = Vec::new();
            for entry in interchange::read(&tokens)? {
                let key = entry.record.key();
                let ac = by_key.get(&key).ok_or_else(|| {
                    Failure::Data(format!(
                        "{file}:{}: comment {key} is not in the corpus",
                        entry.line
                    ))
                })?;
                let toks = entry.tokens(&file)?;
                let (seq, dropped) = encode_comment(ac, toks)
                    .map_err(|e| Failure::Data(format!("{file}:{}: {e}", entry.line)))?;
                for i in dropped {
                    let s = ac.spans[i];
                    io.notice(
                        "SPAN_DROPPED",
                        &key,
                        &format!(
                            "span #{i} ({}, {}, {}) lost every token to an overlapping span",
                            s.start, s.end, s.candy_type
                        ),
                    )?;
                }
                records.push(interchange::Record::from_sequence(&seq));
            }
            io.with_out(out.out.as_deref(), |w| interchange::write(w, &records))
        }

        Command::Decode { tokens, mode, out } => {
            let seqs = interchange::read_tagged(&tokens)?;
            let mut rows = Vec::new();
            for seq in &seqs {
                let key = CommentKey::new(seq.document.clone(), seq.comment_id);
                let spans = match mode {
                    Postprocessing::Basic => decode(seq, mode),
                    Postprocessing::Extended => {
                        let (spans, log) = biocodec::decode_extended_logged(seq);
                        for r in log {
                            io.notice("BOUNDARY_REPAIR", &key, &describe_repair(r))?;
                        }
                        spans
                    }
                };
                rows.extend(spans.into_iter().map(|s| (key.clone(), s)));
            }
            io.with_out(out.out.as_deref(), |w| {
                tsv::write_spans(w, rows.iter().map(|(k, s)| (k, s)))
            })
        }

        Command::ScoreSpans {
            gold,
            pred,
            comments,
            out,
        } => {
            let mut gold = tsv::read_span_file(&gold)?;
            let pred = tsv::read_span_file(&pred)?;
            match comments {
                Some(path) => {
                    for key in comment_keys(&path)? {
                        gold.entry(key).or_default();
                    }
                }
                None => {
                    for key in pred.keys() {
                        gold.entry(key.clone()).or_default();
                    }
                }
            }
            let rep = strict_span_f1(&gold, &pred);
            for key in &rep.unknown_keys {
                io.notice(
                    "UNKNOWN_COMMENT",
                    key,
                    "prediction for a comment outside the gold set; counted as false positives",
                )?;
            }
            emit_scores(io, &report::span_records(&rep), out.as_deref())
        }

        Command::ScoreBinary { gold, pred, out } => {
            let gold = tsv::read_label_file(&gold)?;
            let pred = tsv::read_label_file(&pred)?;
            let scores = positive_f1(&gold, &pred)?;
            emit_scores(io, &[ScoreRecord::new("candy", &scores)], out.as_deref())
        }

        Command::DeriveBinary {
            pred,
            comments,
            tokens,
            out,
        } => {
            let pred: SpanIndex = tsv::read_span_file(&pred)?;
            let keys: Vec<CommentKey> = match (comments, tokens) {
                (Some(c), _) => comment_keys(&c)?,
                (None, Some(t)) => interchange::read(&t)?
                    .into_iter()
                    .map(|e| e.record.key())
                    .collect(),
                (None, None) => {
                    return Err(Failure::Usage(
                        "one of --comments or --tokens is required".into(),
                    ))
                }
            };
            let known: BTreeSet<&CommentKey> = keys.iter().collect();
            for key in pred.keys().filter(|k| !known.contains(k)) {
                io.notice(
                    "UNKNOWN_COMMENT",
                    key,
                    "predicted spans for a comment that is not being labelled",
                )?;
            }
            let labels = derive_binary(&pred, &keys);
            io.with_out(out.out.as_deref(), |w| {
                tsv::write_labels(w, keys.iter().map(|k| (k, labels[k])))
            })
        }
    }
}

fn comment_keys(path: &Path) -> Result<Vec<CommentKey>, Failure> {
    let src = tsv::read_source(path)?;
    Ok(tsv::read_comments(&src, &path.display().to_string())?
        .into_iter()
        .map(|(_, c)| c.key())
        .collect())
}

fn emit_scores(io: &mut Io<'_>, records: &[ScoreRecord], out: Option<&Path>) -> Outcome {
    report::write_table(io.stdout, records)?;
    if let Some(path) = out {
        io.with_out(Some(path), |w| {
            records.iter().try_for_each(|r| report::write_jsonl(w, r))
        })?;
    }
    Ok(())
}

fn describe_repair(r: Repair) -> String {
    match r {
        Repair::Absorbed { token, tag } => {
            format!("continuation token {token} tagged {tag} absorbed into the running span")
        }
        Repair::StartMoved { token, word_start } => {
            format!(
                "span opened at continuation token {token} moved back to word start {word_start}"
            )
        }
        Repair::Merged { token } => {
            format!("span opened at continuation token {token} merged into the preceding span")
        }
    }
}
