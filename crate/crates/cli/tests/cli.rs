//! The command-line surface: exit codes, the full pipeline on a tiny
//! synthetic corpus, and config layering.

use std::path::Path;

use bottomup_cli::{resolve_config, run_with, Common};

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("bottomup").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.code, 0, "bottomup {}: {}", args.join(" "), o.err);
    o.out
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

const TINY: [&str; 16] = [
    "--set",
    "emb_dim=8",
    "--set",
    "enc_hidden=8",
    "--set",
    "dec_hidden=16",
    "--set",
    "sel_static_dim=8",
    "--set",
    "sel_context_dim=8",
    "--set",
    "sel_tagger_hidden=8",
    "--set",
    "min_length=2",
    "--set",
    "max_length=12",
];

fn with_tiny<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(TINY).collect()
}

#[test]
fn no_arguments_prints_usage() {
    let o = run(&[]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("Usage"), "{}", o.err);
}

#[test]
fn help_goes_to_stdout() {
    let o = run(&["--help"]);
    assert_eq!(o.code, 0);
    for sub in ["preprocess", "train-selector", "train-summarizer", "decode", "evaluate", "analyze"] {
        assert!(o.out.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["decode", "--model", "m.busm", "--bogus"]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("--bogus"));
}

#[test]
fn missing_file_is_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.busm");
    let o = run(&["decode", "--model", &p(&missing), "--input", &p(&missing)]);
    assert_eq!(o.code, 1);
    assert!(o.err.starts_with("error: "), "{}", o.err);
    assert_eq!(o.err.trim_end().lines().count(), 1);
    assert!(o.err.contains("absent.busm"));
}

#[test]
fn malformed_dataset_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"a\",\"src_sents\":[\"x y\"],\"tgt_sents\":[\"x\"]}\nnot json\n").unwrap();
    let out = dir.path().join("out.jsonl");
    let o = run(&["preprocess", "--input", &p(&bad), "--output", &p(&out)]);
    assert_eq!(o.code, 1);
    assert!(o.err.contains("line 2"), "{}", o.err);
}

#[test]
fn bad_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    for set in ["beam", "no_such_key=1", "beam=-3"] {
        let o = run(&["preprocess", "--synthetic", "2", "--output", &p(&out), "--set", set]);
        assert_eq!(o.code, 1, "--set {set}");
    }
    let o = run(&["preprocess", "--synthetic", "2", "--output", &p(&out), "--profile", "tiny"]);
    assert_eq!(o.code, 1);
    assert!(o.err.contains("desk"), "{}", o.err);
}

#[test]
fn full_pipeline_on_a_tiny_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data.jsonl");
    let out = ok(&["preprocess", "--synthetic", "24", "--output", &p(&data), "--seed", "3"]);
    assert!(out.contains("wrote 24 examples"));

    let sel_dir = d.join("sel");
    ok(&with_tiny(&[
        "train-selector",
        "--train",
        &p(&data),
        "--valid",
        &p(&data),
        "--epochs",
        "1",
        "--predict",
        &p(&data),
        "--run-dir",
        &p(&sel_dir),
    ]));
    for f in ["config.txt", "logs/selector.jsonl", "checkpoints/selector.busm", "outputs/q.jsonl"] {
        assert!(sel_dir.join(f).is_file(), "{f}");
    }

    let sum_dir = d.join("sum");
    let out = ok(&with_tiny(&[
        "train-summarizer",
        "--train",
        &p(&data),
        "--valid",
        &p(&data),
        "--epochs",
        "1",
        "--run-dir",
        &p(&sum_dir),
    ]));
    assert!(out.contains("validation perplexity"));
    let model = sum_dir.join("checkpoints/summarizer.busm");
    let log = std::fs::read_to_string(sum_dir.join("logs/train.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);

    let plain = d.join("plain.jsonl");
    ok(&["decode", "--model", &p(&model), "--input", &p(&data), "--output", &p(&plain)]);
    let lines: Vec<String> = std::fs::read_to_string(&plain).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 24);
    assert!(lines[0].contains("\"summary\"") && lines[0].contains("\"tokens\""));

    let masked = d.join("masked.jsonl");
    ok(&[
        "decode",
        "--model",
        &p(&model),
        "--input",
        &p(&data),
        "--mask",
        "--epsilon",
        "0.15",
        "--lambda",
        "2",
        "--beam",
        "10",
        "--selector",
        &p(&sel_dir.join("checkpoints/selector.busm")),
        "--output",
        &p(&masked),
    ]);
    assert_eq!(std::fs::read_to_string(&masked).unwrap().lines().count(), 24);

    let with_q = ok(&[
        "decode",
        "--model",
        &p(&model),
        "--input",
        &p(&data),
        "--mask",
        "--q",
        &p(&sel_dir.join("outputs/q.jsonl")),
    ]);
    assert_eq!(with_q.lines().count(), 24);

    let csv = d.join("rouge.csv");
    let table = ok(&["evaluate", "--candidates", &p(&plain), "--references", &p(&data), "--csv", &p(&csv)]);
    assert!(table.contains("ROUGE-1"));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("metric,value"));

    let report_dir = d.join("report");
    let table = ok(&[
        "analyze",
        "--candidates",
        &p(&masked),
        "--references",
        &p(&data),
        "--oracle",
        "--output-dir",
        &p(&report_dir),
    ]);
    for row in ["copied-word precision", "novel-word rate", "LEAD-3", "Top-3 sentences", "threshold words"] {
        assert!(table.contains(row), "analyze lacks {row}");
    }
    assert!(std::fs::read_to_string(report_dir.join("histogram.csv")).unwrap().contains("11+"));

    // masking a baseline without any source of q is refused
    let o = run(&["decode", "--model", &p(&model), "--input", &p(&data), "--mask"]);
    assert_eq!(o.code, 1);
    assert!(o.err.contains("--selector"), "{}", o.err);
}

#[test]
fn config_layers_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.txt");
    std::fs::write(&file, "profile = nyt\nbeam = 3\nalpha = 0.5\n").unwrap();
    let common = Common {
        config: Some(file),
        set: vec!["alpha=0.9".into()],
        seed: Some(12),
        ..Default::default()
    };
    let cfg = resolve_config(&common, Some("beam = 8\nlambda = 3.0\n"), vec![("min_length".into(), "4".into())]).unwrap();
    assert_eq!(cfg.profile, "nyt");
    assert_eq!(cfg.beam, 3); // the file beats the base layer
    assert_eq!(cfg.lambda, 3.0); // the base layer beats the profile
    assert_eq!(cfg.alpha, 0.9); // --set beats the file
    assert_eq!(cfg.min_length, 4);
    assert_eq!(cfg.seed, 12);
    assert_eq!(cfg.emb_dim, 128); // nyt profile dimensions

    let flagged = Common {
        profile: Some("cnn-dm".into()),
        ..Default::default()
    };
    assert_eq!(resolve_config(&flagged, None, Vec::new()).unwrap().min_length, 35);
}
