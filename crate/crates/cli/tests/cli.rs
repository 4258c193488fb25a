use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use candyspan::tsv;
use candyspan_core::{AnnotatedComment, CandyType, Comment, SpanAnnotation};
use proptest::prelude::*;
use tempfile::TempDir;

const COMMENTS: &str = "document\tcomment_id\tcomment
NDY-252\t792\tDu sieht in dem Video mal wieder Mega hübsch aus! Kannst du ein Video zur Frisur machen?
NDY-179\t4917\tich bin dein Grölsta fen seit 2010
NDY-252\t195\tDie Tipps in dem Video sind echt hilfreich. ich werde auf jeden fall einige davon ausprobieren! Danke dafür! :)
NDY-252\t196\tKannst du ein Video zur Frisur machen?
";

const SPANS: &str = "document\tcomment_id\ttype\tstart\tend
NDY-252\t792\tcompliment\t0\t49
NDY-179\t4917\tgroup membership\t0\t34
NDY-252\t195\tpositive feedback\t0\t43
NDY-252\t195\tgratitude\t96\t111
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_candyspan"))
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("comments.tsv"), COMMENTS).unwrap();
        fs::write(dir.path().join("spans.tsv"), SPANS).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn run(&self, args: &[&str]) -> (i32, String, String) {
        let out = bin().args(args).output().unwrap();
        (
            out.status.code().unwrap(),
            String::from_utf8(out.stdout).unwrap(),
            String::from_utf8(out.stderr).unwrap(),
        )
    }
}

/// Whitespace tokenization written as an untagged interchange file.
fn whitespace_tokens(f: &Fixture) -> PathBuf {
    let corpus = tsv::parse_corpus(&f.path("comments.tsv"), None, None).unwrap();
    let mut lines = String::new();
    for ac in &corpus {
        let chars: Vec<char> = ac.comment.text.chars().collect();
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, c) in chars.iter().chain([&' ']).enumerate() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    tokens.push(serde_json::json!([s, i, false]));
                    start = None;
                }
                _ => {}
            }
        }
        lines += &serde_json::json!({
            "document": ac.comment.document,
            "comment_id": ac.comment.comment_id,
            "tokens": tokens,
        })
        .to_string();
        lines.push('\n');
    }
    let p = f.path("tokens.jsonl");
    fs::write(&p, lines).unwrap();
    p
}

#[test]
fn validate_clean_corpus() {
    let f = Fixture::new();
    let (code, out, err) = f.run(&[
        "validate",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.is_empty());
    assert!(err.starts_with(r#"{"config":{"#));
}

#[test]
fn validate_reports_mismatch() {
    let f = Fixture::new();
    fs::write(
        f.path("labels.tsv"),
        "document\tcomment_id\tflausch\nNDY-252\t792\tno\nNDY-179\t4917\tyes\nNDY-252\t195\tyes\nNDY-252\t196\tno\n",
    )
    .unwrap();
    let (code, out, _) = f.run(&[
        "validate",
        "--comments",
        &f.arg("comments.tsv"),
        "--labels",
        &f.arg("labels.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
    ]);
    assert_eq!(code, 1);
    let rec: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(rec["code"], "LABEL_SPAN_MISMATCH");
    assert_eq!(rec["document"], "NDY-252");
    assert_eq!(rec["comment_id"], 792);
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.run(&["frobnicate"]).0, 2);
    assert_eq!(
        f.run(&["split", "--comments", &f.arg("comments.tsv"), "--k", "1"])
            .0,
        2
    );
    assert_eq!(
        f.run(&[
            "holdout",
            "--comments",
            &f.arg("comments.tsv"),
            "--fraction",
            "1.5"
        ])
        .0,
        2
    );
    assert_eq!(
        f.run(&["decode", "--tokens", "x.jsonl", "--mode", "fancy"])
            .0,
        2
    );
    let (code, _, err) = f.run(&["stats", "--comments", &f.arg("missing.tsv")]);
    assert_eq!(code, 1);
    assert!(err.contains("missing.tsv"));
    // Infeasible split is a data error.
    assert_eq!(
        f.run(&["split", "--comments", &f.arg("comments.tsv"), "--k", "9"])
            .0,
        1
    );
    assert_eq!(f.run(&["--help"]).0, 0);
}

#[test]
fn bad_span_row_names_line() {
    let f = Fixture::new();
    fs::write(
        f.path("bad.tsv"),
        "document\tcomment_id\ttype\tstart\tend\nNDY-252\t196\tcompliment\t0\t999\n",
    )
    .unwrap();
    let (code, _, err) = f.run(&[
        "stats",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("bad.tsv"),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("bad.tsv:2:"), "{err}");
}

#[test]
fn stats_and_dedup() {
    let f = Fixture::new();
    let (code, out, _) = f.run(&[
        "stats",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
    ]);
    assert_eq!(code, 0);
    let rec: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(rec["comment_count"], 4);
    assert_eq!(rec["span_count"], 4);
    assert_eq!(rec["mean_spans_per_comment"], "1.0000");
    assert_eq!(rec["mean_spans_per_candy_comment"], "1.3333");

    let out_dir = f.path("dedup");
    let (code, out, _) = f.run(&[
        "dedup",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
        "--out",
        &out_dir.display().to_string(),
    ]);
    assert_eq!(code, 0);
    let rec: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(rec["removed_count"], 0);
    let again = tsv::parse_corpus(
        &out_dir.join("comments.tsv"),
        Some(&out_dir.join("labels.tsv")),
        Some(&out_dir.join("spans.tsv")),
    )
    .unwrap();
    assert_eq!(again.len(), 4);
}

#[test]
fn split_is_byte_identical() {
    let f = Fixture::new();
    let args = |out: &str| {
        vec![
            "split".to_string(),
            "--comments".into(),
            f.arg("comments.tsv"),
            "--spans".into(),
            f.arg("spans.tsv"),
            "--k".into(),
            "2".into(),
            "--mode".into(),
            "binary".into(),
            "--seed".into(),
            "42".into(),
            "--out".into(),
            f.arg(out),
        ]
    };
    let a: Vec<String> = args("a.tsv");
    let b: Vec<String> = args("b.tsv");
    assert_eq!(bin().args(&a).output().unwrap().status.code(), Some(0));
    assert_eq!(bin().args(&b).output().unwrap().status.code(), Some(0));
    let (x, y) = (
        fs::read(f.path("a.tsv")).unwrap(),
        fs::read(f.path("b.tsv")).unwrap(),
    );
    assert_eq!(x, y);
    let folds = tsv::read_folds(std::str::from_utf8(&x).unwrap(), "a.tsv").unwrap();
    assert_eq!(folds.assignment.len(), 4);
    assert_eq!(folds.fold_count, 2);
}

#[test]
fn holdout_and_oversample() {
    let f = Fixture::new();
    let (code, out, err) = f.run(&[
        "holdout",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
        "--fraction",
        "0.5",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.matches("\tholdout").count(), 2);
    assert!(err.contains(r#""holdout_fraction":0.5"#));

    let (code, out, _) = f.run(&[
        "oversample",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
    ]);
    // Three candy comments against one non-candy: nothing to add.
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 5);
}

#[test]
fn decode_all_outside_gives_empty_spans() {
    let f = Fixture::new();
    fs::write(
        f.path("pred.jsonl"),
        r#"{"document":"d","comment_id":1,"tokens":[[0,3,false],[4,6,false]],"tags":["O","O"]}"#,
    )
    .unwrap();
    let (code, out, _) = f.run(&[
        "decode",
        "--mode",
        "basic",
        "--tokens",
        &f.arg("pred.jsonl"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "document\tcomment_id\ttype\tstart\tend\n");
}

#[test]
fn decode_rejects_unknown_tag_names() {
    let f = Fixture::new();
    fs::write(
        f.path("pred.jsonl"),
        r#"{"document":"d","comment_id":1,"tokens":[[0,3,false]],"tags":["B-PER"]}"#,
    )
    .unwrap();
    let (code, _, err) = f.run(&["decode", "--tokens", &f.arg("pred.jsonl")]);
    assert_eq!(code, 1);
    assert!(err.contains("B-PER"));
}

#[test]
fn extended_decode_logs_repairs() {
    let f = Fixture::new();
    fs::write(
        f.path("pred.jsonl"),
        r#"{"document":"d","comment_id":1,"tokens":[[0,4,false],[4,6,true]],"tags":["B-compliment","B-compliment"]}"#,
    )
    .unwrap();
    let (code, out, err) = f.run(&[
        "decode",
        "--mode",
        "extended",
        "--tokens",
        &f.arg("pred.jsonl"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().nth(1), Some("d\t1\tcompliment\t0\t6"));
    assert!(err.contains("BOUNDARY_REPAIR"));
    assert!(err.contains(r#""postprocessing":"extended""#));
}

#[test]
fn score_spans_self() {
    let f = Fixture::new();
    let (code, out, _) = f.run(&[
        "score-spans",
        "--gold",
        &f.arg("spans.tsv"),
        "--pred",
        &f.arg("spans.tsv"),
        "--out",
        &f.arg("report.jsonl"),
    ]);
    assert_eq!(code, 0);
    let overall = out.lines().nth(1).unwrap();
    assert!(overall.starts_with("overall"));
    assert!(overall.ends_with("1.0000"));
    let report = fs::read_to_string(f.path("report.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(report.lines().next().unwrap()).unwrap();
    assert_eq!(first["f1"], "1.0000");
    assert_eq!(report.lines().count(), 11);
}

#[test]
fn score_spans_warns_on_unknown_comment() {
    let f = Fixture::new();
    fs::write(
        f.path("pred.tsv"),
        "document\tcomment_id\ttype\tstart\tend\nXYZ\t1\tcompliment\t0\t3\n",
    )
    .unwrap();
    let (code, _, err) = f.run(&[
        "score-spans",
        "--gold",
        &f.arg("spans.tsv"),
        "--pred",
        &f.arg("pred.tsv"),
        "--comments",
        &f.arg("comments.tsv"),
    ]);
    assert_eq!(code, 0);
    assert!(err.contains("UNKNOWN_COMMENT"));
}

#[test]
fn pipeline_encode_decode_score_derive() {
    let f = Fixture::new();
    let tokens = whitespace_tokens(&f);
    let (code, _, err) = f.run(&[
        "encode",
        "--comments",
        &f.arg("comments.tsv"),
        "--spans",
        &f.arg("spans.tsv"),
        "--tokens",
        &tokens.display().to_string(),
        "--out",
        &f.arg("tagged.jsonl"),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(!err.contains("SPAN_DROPPED"));

    for mode in ["basic", "extended"] {
        let (code, _, _) = f.run(&[
            "decode",
            "--mode",
            mode,
            "--tokens",
            &f.arg("tagged.jsonl"),
            "--out",
            &f.arg("decoded.tsv"),
        ]);
        assert_eq!(code, 0);
        let (code, out, _) = f.run(&[
            "score-spans",
            "--gold",
            &f.arg("spans.tsv"),
            "--pred",
            &f.arg("decoded.tsv"),
        ]);
        assert_eq!(code, 0);
        assert!(out.lines().nth(1).unwrap().ends_with("1.0000"), "{out}");
    }

    let (code, out, _) = f.run(&[
        "derive-binary",
        "--pred",
        &f.arg("decoded.tsv"),
        "--tokens",
        &f.arg("tagged.jsonl"),
        "--out",
        &f.arg("derived.tsv"),
    ]);
    assert_eq!(code, 0, "{out}");
    let derived = fs::read_to_string(f.path("derived.tsv")).unwrap();
    assert!(derived.contains("NDY-252\t196\tno"));
    assert!(derived.contains("NDY-252\t195\tyes"));

    let (code, _, _) = f.run(&[
        "derive-binary",
        "--pred",
        &f.arg("spans.tsv"),
        "--comments",
        &f.arg("comments.tsv"),
        "--out",
        &f.arg("gold_labels.tsv"),
    ]);
    assert_eq!(code, 0);
    let (code, out, _) = f.run(&[
        "score-binary",
        "--gold",
        &f.arg("gold_labels.tsv"),
        "--pred",
        &f.arg("derived.tsv"),
    ]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().starts_with("candy"));
    assert!(out.lines().nth(1).unwrap().ends_with("1.0000"));
}

#[test]
fn derive_binary_needs_a_key_source() {
    let f = Fixture::new();
    assert_eq!(
        f.run(&["derive-binary", "--pred", &f.arg("spans.tsv")]).0,
        2
    );
}

#[test]
fn score_binary_mixed() {
    let f = Fixture::new();
    let header = "document\tcomment_id\tflausch\n";
    fs::write(
        f.path("gold.tsv"),
        format!("{header}d\t1\tyes\nd\t2\tyes\nd\t3\tno\nd\t4\tno\n"),
    )
    .unwrap();
    fs::write(
        f.path("pred.tsv"),
        format!("{header}d\t1\tyes\nd\t2\tno\nd\t3\tyes\nd\t4\tno\n"),
    )
    .unwrap();
    let (code, out, _) = f.run(&[
        "score-binary",
        "--gold",
        &f.arg("gold.tsv"),
        "--pred",
        &f.arg("pred.tsv"),
    ]);
    assert_eq!(code, 0);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["candy", "1", "1", "1", "0.5000", "0.5000", "0.5000"]);

    fs::write(f.path("short.tsv"), format!("{header}d\t1\tyes\n")).unwrap();
    assert_eq!(
        f.run(&[
            "score-binary",
            "--gold",
            &f.arg("gold.tsv"),
            "--pred",
            &f.arg("short.tsv")
        ])
        .0,
        1
    );
}

#[test]
fn in_process_run_captures_output() {
    let f = Fixture::new();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = candyspan::run(
        ["candyspan", "stats", "--comments", &f.arg("comments.tsv")],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0);
    assert!(String::from_utf8(out)
        .unwrap()
        .contains(r#""comment_count":4"#));
}

fn write_and_parse(corpus: &[AnnotatedComment], dir: &Path) -> Vec<AnnotatedComment> {
    let (mut c, mut l, mut s) = (Vec::new(), Vec::new(), Vec::new());
    tsv::write_corpus(corpus, &mut c, &mut l, &mut s).unwrap();
    fs::write(dir.join("c.tsv"), c).unwrap();
    fs::write(dir.join("l.tsv"), l).unwrap();
    fs::write(dir.join("s.tsv"), s).unwrap();
    tsv::parse_corpus(
        &dir.join("c.tsv"),
        Some(&dir.join("l.tsv")),
        Some(&dir.join("s.tsv")),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_parse_is_identity(
        rows in prop::collection::vec(("[a-zA-Z0-9 äöüß😀\\\\\t\n\r!]{1,20}", prop::collection::vec((0usize..20, 1usize..20, 0usize..10), 0..4)), 0..12)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let corpus: Vec<AnnotatedComment> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (text, raw))| {
                let len = text.chars().count();
                let spans = raw
                    .into_iter()
                    .map(|(s, l, t)| {
                        let start = s % len;
                        SpanAnnotation::new(start, (start + l).min(len), CandyType::ALL[t])
                    })
                    .collect();
                AnnotatedComment::from_spans(Comment::new(format!("VID-{}", i % 3), i as u64 * 7, text), spans)
            })
            .collect();
        prop_assert_eq!(write_and_parse(&corpus, dir.path()), corpus);
    }
}
