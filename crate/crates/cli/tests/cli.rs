//! End-to-end tests of the command-line surface: exit codes, output shapes,
//! and the prompt/repair byte-equality contract. Everything runs offline
//! against the mock fixtures shipped with the core crate.

use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asserthint"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn mock_verifier_args(fixture: &str) -> Vec<String> {
    vec![
        "--verifier".into(),
        "mock".into(),
        "--verifier-fixture".into(),
        fixtures().join("mocks").join(fixture).display().to_string(),
    ]
}

fn mock_llm_args(fixture: &str) -> Vec<String> {
    vec![
        "--llm".into(),
        "mock".into(),
        "--llm-fixture".into(),
        fixtures().join("mocks").join(fixture).display().to_string(),
    ]
}

#[test]
fn localize_prints_the_single_branch_candidate() {
    let out = bin()
        .arg("localize")
        .arg(fixtures().join("broken/union_size.dfy"))
        .args(["--lemma", "LemmaUnionSize"])
        .args(mock_verifier_args("verifier_union.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("ThenBranch"), "got: {text}");
    assert_eq!(text.lines().count(), 2, "header plus exactly one candidate");

    let json = bin()
        .arg("localize")
        .arg(fixtures().join("broken/union_size.dfy"))
        .args(["--lemma", "LemmaUnionSize", "--json"])
        .args(mock_verifier_args("verifier_union.json"))
        .output()
        .unwrap();
    let rows: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["line"], 15);
    assert_eq!(rows[0]["block_kind"], "then_branch");
}

#[test]
fn prompt_with_zero_examples_is_system_plus_user() {
    let out = bin()
        .arg("prompt")
        .arg(fixtures().join("broken/parse_digits.dfy"))
        .args([
            "--lemma",
            "ParseDigitsAndDot",
            "--variant",
            "similarity",
            "-m",
            "0",
        ])
        .args(mock_verifier_args("verifier_parse.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# SYSTEM\n"));
    assert_eq!(text.matches("# USER").count(), 1);
    assert_eq!(text.matches("# ASSISTANT").count(), 0);
    assert!(text.contains("<assertion> Insert the assertion here </assertion>"));
}

#[test]
fn prompt_output_matches_the_repair_fingerprint_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("bank.jsonl");
    let built = bin()
        .arg("bank")
        .arg("--codebase")
        .arg(fixtures().join("corpus"))
        .arg("--out")
        .arg(&bank)
        .output()
        .unwrap();
    assert!(built.status.success(), "stderr: {}", stderr(&built));

    let common = |cmd: &str| {
        let mut c = bin();
        c.arg(cmd)
            .arg(fixtures().join("broken/parse_digits.dfy"))
            .args(["--lemma", "ParseDigitsAndDot", "--variant", "similarity"])
            .arg("--bank")
            .arg(&bank)
            .args(mock_verifier_args("verifier_parse.json"));
        c
    };
    let prompt_out = common("prompt").output().unwrap();
    assert!(
        prompt_out.status.success(),
        "stderr: {}",
        stderr(&prompt_out)
    );
    let transcript = stdout(&prompt_out);
    let fingerprint: String = Sha256::digest(transcript.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    let repair_out = common("repair")
        .args(mock_llm_args("llm_parse.json"))
        .arg("--json")
        .output()
        .unwrap();
    assert!(
        repair_out.status.success(),
        "stderr: {}",
        stderr(&repair_out)
    );
    let outcome: serde_json::Value = serde_json::from_str(&stdout(&repair_out)).unwrap();
    assert_eq!(
        outcome["prompt_fingerprint"],
        serde_json::json!(fingerprint)
    );
    assert_eq!(outcome["success"], serde_json::json!(true));
}

#[test]
fn repairing_a_verifying_lemma_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("all_green.json");
    std::fs::write(&fixture, r#"{"default": "verified"}"#).unwrap();
    let out = bin()
        .arg("repair")
        .arg(fixtures().join("broken/parse_digits.dfy"))
        .args(["--lemma", "ParseDigitsAndDot"])
        .args([
            "--verifier",
            "mock",
            "--verifier-fixture",
            fixture.to_str().unwrap(),
        ])
        .args(mock_llm_args("llm_parse.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("already verifies"));
}

#[test]
fn unknown_flags_exit_with_usage_error() {
    let out = bin()
        .args(["localize", "--definitely-not-a-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn missing_lemma_is_a_usage_error() {
    let out = bin()
        .arg("localize")
        .arg(fixtures().join("broken/union_size.dfy"))
        .args(["--lemma", "NoSuchLemma"])
        .args(mock_verifier_args("verifier_union.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("NoSuchLemma"));
}

#[test]
fn extract_bench_report_chain_runs_offline() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.jsonl");
    let report = dir.path().join("report.json");
    let out = bin()
        .arg("extract")
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .arg("--out")
        .arg(&tasks)
        .arg("--report")
        .arg(&report)
        .args(mock_verifier_args("verifier_seq_add.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["total_assertions_found"], 3);
    assert_eq!(report["necessary"], 2);
    assert_eq!(report["unnecessary"], 1);

    let bank = dir.path().join("bank.jsonl");
    bin()
        .arg("bank")
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .arg("--out")
        .arg(&bank)
        .output()
        .unwrap();

    let bench_json = dir.path().join("bench.json");
    let out = bin()
        .arg("bench")
        .arg("--tasks")
        .arg(&tasks)
        .arg("--bank")
        .arg(&bank)
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .args(["--variant", "placeholder"])
        .arg("--out")
        .arg(&bench_json)
        .args(mock_verifier_args("verifier_seq_add.json"))
        .args(mock_llm_args("llm_seq_add.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("solved 2/2"));

    let out = bin()
        .arg("report")
        .arg("--bench")
        .arg(&bench_json)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = stdout(&out);
    assert!(csv.starts_with("k,overall"));
    assert_eq!(
        csv.lines().count(),
        11,
        "header plus one row per attempt budget"
    );
    assert!(csv.lines().nth(1).unwrap().starts_with("1,1.000000"));
}

#[test]
fn similar_ranks_the_wrap_lemma_for_the_parsing_target() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("bank.jsonl");
    bin()
        .arg("bank")
        .arg("--codebase")
        .arg(fixtures().join("corpus"))
        .arg("--out")
        .arg(&bank)
        .output()
        .unwrap();
    let out = bin()
        .arg("similar")
        .arg(fixtures().join("broken/parse_digits.dfy"))
        .args([
            "--lemma",
            "ParseDigitsAndDot",
            "--strategy",
            "proofsim",
            "-m",
            "6",
        ])
        .arg("--bank")
        .arg(&bank)
        .args(mock_verifier_args("verifier_parse.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("CountDCLast"), "got: {text}");
    assert_eq!(text.lines().count(), 7, "header plus six rows");
}

#[test]
fn bench_with_an_empty_task_list_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.jsonl");
    std::fs::write(&tasks, "").unwrap();
    let bank = dir.path().join("bank.jsonl");
    bin()
        .arg("bank")
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .arg("--out")
        .arg(&bank)
        .output()
        .unwrap();
    let llm = dir.path().join("llm.json");
    std::fs::write(&llm, r#"{"default": ["assert 1 == 2;"]}"#).unwrap();
    let out = bin()
        .arg("bench")
        .arg("--tasks")
        .arg(&tasks)
        .arg("--bank")
        .arg(&bank)
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .arg("--out")
        .arg(dir.path().join("bench.json"))
        .args(mock_verifier_args("verifier_seq_add.json"))
        .args(["--llm", "mock", "--llm-fixture", llm.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
}

#[test]
fn bench_with_no_fixes_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = dir.path().join("tasks.jsonl");
    bin()
        .arg("extract")
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .arg("--out")
        .arg(&tasks)
        .args(mock_verifier_args("verifier_seq_add.json"))
        .output()
        .unwrap();
    let bank = dir.path().join("bank.jsonl");
    bin()
        .arg("bank")
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .arg("--out")
        .arg(&bank)
        .output()
        .unwrap();
    let llm = dir.path().join("useless_llm.json");
    std::fs::write(&llm, r#"{"default": ["assert 1 == 2;"]}"#).unwrap();
    let out = bin()
        .arg("bench")
        .arg("--tasks")
        .arg(&tasks)
        .arg("--bank")
        .arg(&bank)
        .arg("--codebase")
        .arg(fixtures().join("corpus_seq_add"))
        .args(["--variant", "placeholder"])
        .arg("--out")
        .arg(dir.path().join("bench.json"))
        .args(mock_verifier_args("verifier_seq_add.json"))
        .args(["--llm", "mock", "--llm-fixture", llm.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}
