//! Black-box tests of the command-line interface against the shipped fixtures.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dermagent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn ask_answers_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("trace.jsonl");
    let config = fixtures().join("config.toml");
    let stdout = run_ok(&[
        "ask",
        "--config",
        config.to_str().unwrap(),
        "--image",
        "fig2_hand",
        "--question",
        "What disease is shown in this image?",
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert!(stdout.contains("diagnosis: granuloma annulare"), "{stdout}");
    assert!(stdout.contains("rounds: 2"), "{stdout}");
    assert!(stdout.contains("citations:"), "{stdout}");
    let trace = std::fs::read_to_string(&trace_path).unwrap();
    assert!(trace.lines().count() > 4);
    for line in trace.lines() {
        serde_json::from_str::<Value>(line).expect("every trace line is JSON");
    }
}

#[test]
fn ask_with_disabled_tool_still_answers() {
    let config = fixtures().join("config.toml");
    let stdout = run_ok(&[
        "ask",
        "--config",
        config.to_str().unwrap(),
        "--image",
        "img_mel_1",
        "--question",
        "What disease is shown in this image?",
        "--disable",
        "guideline_rag",
    ]);
    assert!(stdout.contains("diagnosis:"), "{stdout}");
    assert!(!stdout.contains("guideline_rag:"), "{stdout}");
}

#[test]
fn eval_reports_metrics() {
    let config = fixtures().join("config.toml");
    let manifest = fixtures().join("manifest_diagnosis.jsonl");
    let stdout = run_ok(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["n"], 10);
    assert_eq!(report["failures"], 0);
    assert_eq!(report["accuracy"], 0.9);
}

#[test]
fn ablate_compares_full_and_ablated_passes() {
    let config = fixtures().join("config.toml");
    let manifest = fixtures().join("manifest_diagnosis.jsonl");
    let stdout = run_ok(&[
        "ablate",
        "--config",
        config.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
        "--tool",
        "case_rag",
    ]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["disabled_tool"], "case_rag");
    assert!(report["baseline"]["accuracy"].is_number());
    assert!(report["ablated"]["accuracy"].is_number());
    assert_eq!(report["ablated"]["failures"], 0);
}

#[test]
fn ingest_cases_reports_corpus_shape() {
    let input = fixtures().join("cases.jsonl");
    let stdout = run_ok(&["ingest-cases", "--input", input.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["entries"], 25);
    assert_eq!(report["dimension"], 8);
}

#[test]
fn ingest_guidelines_builds_persistent_index() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("index");
    let input = fixtures().join("guidelines.jsonl");
    let stdout = run_ok(&[
        "ingest-guidelines",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--dimension",
        "512",
    ]);
    let report: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["chunks"], 12);
    assert_eq!(report["dimension"], 512);
    assert!(out_dir.exists());
}

#[test]
fn ontology_resolves_typo_query() {
    let taxonomy = fixtures().join("taxonomy.json");
    let stdout = run_ok(&[
        "ontology",
        "--taxonomy",
        taxonomy.to_str().unwrap(),
        "--mode",
        "hierarchy",
        "--name",
        "granuloma anulare",
    ]);
    let answer: Value = serde_json::from_str(&stdout).unwrap();
    let path: Vec<&str> = answer["path"]["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(path.last(), Some(&"granuloma annulare"));
}

#[test]
fn unknown_tool_name_is_rejected() {
    let config = fixtures().join("config.toml");
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--manifest",
        fixtures().join("manifest_tasks.jsonl").to_str().unwrap(),
        "--disable",
        "not_a_tool",
    ]);
    assert!(!out.status.success());
}
