//! End-to-end contract tests for the `scs2s` binary: exit codes, output
//! formats, artifact headers, and configuration precedence.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn scs2s(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scs2s"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("usage: scs2s"), "stderr was: {err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn no_subcommand_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(&[], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn version_prints_tool_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(&["version"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).starts_with("scs2s "));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(&["synth", "--bogus", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn gradcheck_reports_error_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(
        &["gradcheck", "--hidden", "8", "--vocab", "12", "--layers", "2", "--attention"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("max relative error"));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(&["prepare"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("adfa-root"));
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = scs2s(&["prepare", "--adfa-root", "nowhere"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

/// Builds a small prepared corpus plus a 2-epoch model in `dir`.
fn bootstrap(dir: &Path) {
    let synth = scs2s(
        &["synth", "--builtin", "--traces", "40", "--seed", "5", "--out-dir", "data"],
        dir,
    );
    assert!(synth.status.success(), "synth failed: {}", String::from_utf8_lossy(&synth.stderr));
    let prepare = scs2s(
        &[
            "prepare",
            "--adfa-root",
            "data",
            "--out-dir",
            "prep",
            "--window-lengths",
            "10,12",
            "--stride",
            "6",
            "--seed",
            "5",
        ],
        dir,
    );
    assert!(prepare.status.success(), "prepare failed: {}", String::from_utf8_lossy(&prepare.stderr));
    let train = scs2s(
        &[
            "train", "--pairs", "prep/train.tsv", "--heldout", "prep/test.tsv", "--vocab",
            "prep/vocab.txt", "--hidden", "12", "--layers", "1", "--attention", "--lr0", "0.5",
            "--max-epochs", "12", "--stop-patience", "20", "--out-dir", "run", "--seed", "5",
        ],
        dir,
    );
    assert!(train.status.success(), "train failed: {}", String::from_utf8_lossy(&train.stderr));
}

#[test]
fn predict_prints_bounded_raw_calls() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap(dir.path());
    let out = scs2s(
        &["predict", "--model", "run/model.ckpt", "--input", "6 6 63 6 42", "--max-len", "10"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.ends_with('\n'), "prediction must be newline-terminated");
    let calls: Vec<&str> = text.trim().split_whitespace().collect();
    assert!(calls.len() <= 10, "emitted {} calls with --max-len 10", calls.len());
    for call in calls {
        call.parse::<u32>().expect("raw call numbers only");
    }
}

#[test]
fn predict_reads_stdin_when_no_input_flag() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap(dir.path());
    let mut child = Command::new(env!("CARGO_BIN_EXE_scs2s"))
        .args(["predict", "--model", "run/model.ckpt", "--max-len", "5"])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.as_mut().unwrap().write_all(b"3 4 5 6\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).trim().split_whitespace().count() <= 5);
}

#[test]
fn artifacts_start_with_config_headers() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap(dir.path());
    for artifact in ["prep/counts.csv", "prep/train.tsv", "run/history.csv"] {
        let text = std::fs::read_to_string(dir.path().join(artifact)).unwrap();
        let mut lines = text.lines();
        let first = lines.next().unwrap();
        assert!(
            first.starts_with("# scs2s "),
            "{artifact} first line: {first:?}"
        );
        assert!(
            text.lines().take_while(|l| l.starts_with('#')).any(|l| l.contains("seed=5")),
            "{artifact} header must echo the resolved config"
        );
    }
}

#[test]
fn eval_and_detect_emit_expected_csvs() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap(dir.path());
    let eval = scs2s(
        &[
            "eval", "--model", "run/model.ckpt", "--pairs", "prep/test.tsv", "--max-len", "8",
            "--out-dir", "run",
        ],
        dir.path(),
    );
    assert!(eval.status.success(), "eval failed: {}", String::from_utf8_lossy(&eval.stderr));
    for name in ["bleu.csv", "tfidf.csv", "semantic.csv"] {
        assert!(dir.path().join("run").join(name).exists(), "missing {name}");
    }
    let bleu = std::fs::read_to_string(dir.path().join("run/bleu.csv")).unwrap();
    assert!(bleu.lines().any(|l| l.starts_with("all,")));

    let detect = scs2s(
        &[
            "detect", "--model", "run/model.ckpt", "--train-pairs", "prep/train.tsv", "--pairs",
            "prep/test.tsv", "--max-len", "8", "--out-dir", "run",
        ],
        dir.path(),
    );
    assert!(detect.status.success(), "detect failed: {}", String::from_utf8_lossy(&detect.stderr));
    let auc = std::fs::read_to_string(dir.path().join("run/auc.csv")).unwrap();
    for condition in ["target", "predicted", "extended"] {
        assert!(auc.lines().any(|l| l.starts_with(&format!("{condition},"))), "{auc}");
    }
    let roc = std::fs::read_to_string(dir.path().join("run/roc.csv")).unwrap();
    assert!(roc.lines().skip_while(|l| l.starts_with('#')).next() == Some("condition,threshold,fpr,tpr"));
}

#[test]
fn report_collects_runs_into_summary() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap(dir.path());
    let eval = scs2s(
        &[
            "eval", "--model", "run/model.ckpt", "--pairs", "prep/test.tsv", "--max-len", "8",
            "--out-dir", "run", "--layers", "1",
        ],
        dir.path(),
    );
    assert!(eval.status.success());
    let report = scs2s(&["report", "--runs", "run", "--out-dir", "."], dir.path());
    assert!(report.status.success(), "report failed: {}", String::from_utf8_lossy(&report.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.contains("GRU-1")), "{summary}");
    assert!(stdout_of(&report).contains("BLEU score"));
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_scs2s"))
        .args(["synth", "--builtin", "--traces", "8", "--seed", "1", "--out-dir", "env_test"])
        .env("SCS2S_TRACES", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    // 2 per automaton, not 8: the environment beat the flag.
    assert!(stdout_of(&out).contains("wrote 4 traces"), "{}", stdout_of(&out));
}

#[test]
fn unknown_environment_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_scs2s"))
        .args(["synth", "--builtin", "--out-dir", "x"])
        .env("SCS2S_FROBNICATE", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SCS2S_FROBNICATE"));
}

#[test]
fn checkpoint_vocab_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    bootstrap(dir.path());
    // A different vocabulary file than the one the model was trained with.
    std::fs::write(dir.path().join("other.vocab"), "1\n2\n3\n").unwrap();
    let out = scs2s(
        &[
            "eval", "--model", "run/model.ckpt", "--pairs", "prep/test.tsv", "--vocab",
            "other.vocab", "--out-dir", "x",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash mismatch"));
}
