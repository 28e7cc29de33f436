//! Benchmark task extraction by assertion ablation.
//!
//! For every single-line assertion in a codebase: remove it, re-verify the
//! enclosing lemma, and keep the assertion as a task only when the proof
//! actually fails without it. Within a lemma, assertions whose exact text
//! appears more than once are excluded up front (an identical in-context
//! example would make the task trivial). The scanned tree is never modified;
//! all verification runs happen on copies in a scratch directory.

use crate::backends::{VerdictStatus, VerifierBackend};
use crate::context::{find_lemmas, LemmaSpan, ProofContext};
use crate::lexer::{self, TokenKind};
use crate::selection::{source_files, ExampleOrigin, ExampleRecord};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A single-line assertion statement found in source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoundAssertion {
    /// 1-based line within the scanned text.
    pub line: usize,
    /// 1-based column of the statement start.
    pub column: usize,
    /// The statement text, through its semicolon.
    pub text: String,
}

/// Finds single-statement `assert ...;` lines: optional label, the assert
/// keyword, an expression, and the terminating semicolon all on one line.
/// `assert ... by { ... }` blocks and multi-line assertions are not captured.
pub fn find_assertions(source: &str) -> Vec<FoundAssertion> {
    let mut out = Vec::new();
    for line in lexer::tokenize_context(source) {
        let mut toks = line.tokens.as_slice();
        // Optional `label L:` prefix.
        if toks.first().map(|t| t.text.as_str()) == Some("label") && toks.len() > 3 {
            toks = &toks[3..];
        }
        let starts_assert = toks
            .first()
            .is_some_and(|t| t.kind == TokenKind::Keyword && t.text == "assert");
        if !starts_assert {
            continue;
        }
        let single_semi = toks.iter().filter(|t| t.text == ";").count() == 1;
        let ends_semi = toks.last().is_some_and(|t| t.text == ";");
        let has_by = toks
            .iter()
            .any(|t| t.kind == TokenKind::Keyword && t.text == "by");
        if !(single_semi && ends_semi) || has_by {
            continue;
        }
        let Some(text) = statement_text(&line.raw) else {
            continue;
        };
        out.push(FoundAssertion {
            line: line.line_number,
            column: crate::context::indent_width(&line.raw) + 1,
            text,
        });
    }
    out
}

/// The statement text of a line: from the first non-blank character through
/// the final semicolon outside string or character literals (drops a trailing
/// line comment).
fn statement_text(raw: &str) -> Option<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut last_semi = None;
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '"' => {
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
            }
            '\'' => {
                if i + 2 < chars.len() && chars[i + 1] != '\'' && chars[i + 2] == '\'' {
                    i += 2;
                }
            }
            '/' if chars.get(i + 1) == Some(&'/') => break,
            ';' => last_semi = Some(i),
            _ => {}
        }
        i += 1;
    }
    let end: usize = chars[..=last_semi?].iter().map(|c| c.len_utf8()).sum();
    Some(raw[..end].trim_start().to_owned())
}

/// One assertion whose removal breaks the proof, with its context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionTask {
    pub origin: ExampleOrigin,
    pub assertion: String,
    pub context: ProofContext,
    pub codebase_id: String,
}

/// Disjoint accounting of every assertion the scan found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub total_assertions_found: usize,
    pub necessary: usize,
    pub unnecessary: usize,
    pub duplicates_excluded: usize,
    pub verifier_failures: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Post-run spot check: sampled tasks re-verified to fail without their
    /// assertion and pass with it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recheck: Option<RecheckReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecheckReport {
    pub sampled: usize,
    pub consistent: bool,
}

impl ExtractionReport {
    pub fn counts_are_consistent(&self) -> bool {
        self.necessary + self.unnecessary + self.duplicates_excluded + self.verifier_failures
            == self.total_assertions_found
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionOptions {
    /// Worker pool bound; 0 means the library default.
    pub jobs: usize,
    pub timeout: Duration,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            jobs: 0,
            timeout: Duration::from_secs(120),
        }
    }
}

struct LemmaUnit {
    rel_path: String,
    scratch_file: PathBuf,
    lemma: LemmaSpan,
    lemma_lines: Vec<String>,
    kept: Vec<FoundAssertion>,
    duplicates: usize,
}

enum AblationOutcome {
    Necessary(Box<ExtractionTask>),
    Unnecessary,
    Infra(String),
}

struct UnitResult {
    outcomes: Vec<AblationOutcome>,
    baseline_failed: Option<String>,
}

fn copy_tree(from: &Path, to: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::VerifierInfra(format!("scan failed: {e}")))?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walkdir stays under its root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        } else if entry.file_type().is_file() {
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::copy(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
    }
    Ok(())
}

fn ablated_file(scratch_file: &Path, file_line: usize) -> PathBuf {
    let stem = scratch_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".to_owned());
    scratch_file.with_file_name(format!("{stem}.ablate_{file_line}.dfy"))
}

fn run_unit(
    unit: &LemmaUnit,
    verifier: &dyn VerifierBackend,
    timeout: Duration,
    codebase_id: &str,
) -> UnitResult {
    let baseline = verifier.verify(&unit.scratch_file, Some(&unit.lemma.name), timeout);
    if !baseline.status.is_verified() {
        return UnitResult {
            outcomes: Vec::new(),
            baseline_failed: Some(format!(
                "baseline verification of {}::{} did not pass; {} assertions skipped",
                unit.rel_path,
                unit.lemma.name,
                unit.kept.len()
            )),
        };
    }

    let original = match std::fs::read_to_string(&unit.scratch_file) {
        Ok(s) => s,
        Err(e) => {
            return UnitResult {
                outcomes: vec![],
                baseline_failed: Some(format!("could not re-read {}: {e}", unit.rel_path)),
            }
        }
    };
    let original_lines: Vec<&str> = original.lines().collect();

    let outcomes = unit
        .kept
        .iter()
        .map(|found| {
            let file_line = unit.lemma.start_line + found.line - 1;
            let ablated: Vec<&str> = original_lines
                .iter()
                .enumerate()
                .filter(|(i, _)| i + 1 != file_line)
                .map(|(_, l)| *l)
                .collect();
            let variant = ablated_file(&unit.scratch_file, file_line);
            if let Err(e) = std::fs::write(&variant, ablated.join("\n")) {
                return AblationOutcome::Infra(format!("could not write ablation: {e}"));
            }
            let verdict = verifier.verify(&variant, Some(&unit.lemma.name), timeout);
            let _ = std::fs::remove_file(&variant);
            match verdict.status {
                VerdictStatus::Verified => AblationOutcome::Unnecessary,
                VerdictStatus::Failed(_) => {
                    match ProofContext::from_removed_assertion(&unit.lemma_lines, found.line - 1) {
                        Ok(context) => AblationOutcome::Necessary(Box::new(ExtractionTask {
                            origin: ExampleOrigin {
                                file: unit.rel_path.clone(),
                                lemma: unit.lemma.name.clone(),
                                line: file_line,
                                column: found.column,
                            },
                            assertion: found.text.clone(),
                            context,
                            codebase_id: codebase_id.to_owned(),
                        })),
                        Err(e) => AblationOutcome::Infra(format!("context build failed: {e}")),
                    }
                }
                VerdictStatus::Timeout => AblationOutcome::Infra(format!(
                    "timeout ablating {}:{}",
                    unit.rel_path, file_line
                )),
                VerdictStatus::Crashed(detail) => AblationOutcome::Infra(format!(
                    "verifier crash ablating {}:{}: {detail}",
                    unit.rel_path, file_line
                )),
            }
        })
        .collect();

    UnitResult {
        outcomes,
        baseline_failed: None,
    }
}

/// Ablates every found assertion one at a time and re-verifies its lemma.
/// Emits a task per necessary, non-duplicate assertion, plus the report.
/// The codebase under `codebase_root` is read, never written.
pub fn ablate_and_verify(
    codebase_root: &Path,
    verifier: &dyn VerifierBackend,
    options: &ExtractionOptions,
) -> Result<(Vec<ExtractionTask>, ExtractionReport)> {
    let codebase_id = codebase_root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| codebase_root.display().to_string());
    let mut report = ExtractionReport::default();

    let scratch = tempfile::tempdir().map_err(|e| Error::io(codebase_root, e))?;
    copy_tree(codebase_root, scratch.path())?;

    let mut units: Vec<LemmaUnit> = Vec::new();
    for file in source_files(codebase_root) {
        let rel = file
            .strip_prefix(codebase_root)
            .unwrap_or(&file)
            .to_string_lossy()
            .into_owned();
        let source = match std::fs::read_to_string(&file) {
            Ok(s) => s,
            Err(e) => {
                report
                    .warnings
                    .push(format!("skipped unreadable file {rel}: {e}"));
                continue;
            }
        };
        for lemma in find_lemmas(&source) {
            let lemma_lines = lemma.extract_lines(&source);
            let lemma_text = lemma_lines.join("\n");
            let found = find_assertions(&lemma_text);
            if found.is_empty() {
                continue;
            }
            report.total_assertions_found += found.len();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for f in &found {
                *counts.entry(f.text.as_str()).or_insert(0) += 1;
            }
            let (kept, dups): (Vec<_>, Vec<_>) = found
                .iter()
                .cloned()
                .partition(|f| counts[f.text.as_str()] == 1);
            units.push(LemmaUnit {
                rel_path: rel.clone(),
                scratch_file: scratch.path().join(&rel),
                lemma,
                lemma_lines,
                kept,
                duplicates: dups.len(),
            });
        }
    }

    let unit_results = run_units(&units, verifier, options, &codebase_id);

    let mut tasks = Vec::new();
    for (unit, result) in units.iter().zip(unit_results) {
        report.duplicates_excluded += unit.duplicates;
        if let Some(warning) = result.baseline_failed {
            report.verifier_failures += unit.kept.len();
            report.warnings.push(warning);
            continue;
        }
        for outcome in result.outcomes {
            match outcome {
                AblationOutcome::Necessary(task) => {
                    report.necessary += 1;
                    tasks.push(*task);
                }
                AblationOutcome::Unnecessary => report.unnecessary += 1,
                AblationOutcome::Infra(warning) => {
                    report.verifier_failures += 1;
                    report.warnings.push(warning);
                }
            }
        }
    }
    tasks.sort_by(|a, b| a.origin.cmp(&b.origin));

    report.recheck = Some(recheck(&tasks, scratch.path(), verifier, options.timeout));
    if let Some(r) = &report.recheck {
        if !r.consistent {
            report
                .warnings
                .push("recheck found tasks that do not reproduce their verdicts".to_owned());
        }
    }
    debug_assert!(report.counts_are_consistent());
    Ok((tasks, report))
}

#[cfg(feature = "parallel")]
fn run_units(
    units: &[LemmaUnit],
    verifier: &dyn VerifierBackend,
    options: &ExtractionOptions,
    codebase_id: &str,
) -> Vec<UnitResult> {
    let work = || {
        units
            .par_iter()
            .map(|u| run_unit(u, verifier, options.timeout, codebase_id))
            .collect()
    };
    if options.jobs == 0 {
        work()
    } else {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
        {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_units(
    units: &[LemmaUnit],
    verifier: &dyn VerifierBackend,
    options: &ExtractionOptions,
    codebase_id: &str,
) -> Vec<UnitResult> {
    units
        .iter()
        .map(|u| run_unit(u, verifier, options.timeout, codebase_id))
        .collect()
}

/// Re-verifies a small deterministic sample of emitted tasks both ways.
fn recheck(
    tasks: &[ExtractionTask],
    scratch: &Path,
    verifier: &dyn VerifierBackend,
    timeout: Duration,
) -> RecheckReport {
    let sample: Vec<&ExtractionTask> = match tasks.len() {
        0 => vec![],
        n => [0, n / 2, n - 1]
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|&i| &tasks[i])
            .collect(),
    };
    let mut consistent = true;
    for task in &sample {
        let file = scratch.join(&task.origin.file);
        let with = verifier.verify(&file, Some(&task.origin.lemma), timeout);
        let variant = ablated_file(&file, task.origin.line);
        let without_ok = std::fs::read_to_string(&file).ok().and_then(|src| {
            let kept: Vec<&str> = src
                .lines()
                .enumerate()
                .filter(|(i, _)| i + 1 != task.origin.line)
                .map(|(_, l)| l)
                .collect();
            std::fs::write(&variant, kept.join("\n")).ok()
        });
        let without = verifier.verify(&variant, Some(&task.origin.lemma), timeout);
        let _ = std::fs::remove_file(&variant);
        if without_ok.is_none()
            || !with.status.is_verified()
            || !matches!(without.status, VerdictStatus::Failed(_))
        {
            consistent = false;
        }
    }
    RecheckReport {
        sampled: sample.len(),
        consistent,
    }
}

/// Writes tasks as JSON lines; schema matches the example bank plus a
/// `necessary: true` field.
pub fn save_tasks(tasks: &[ExtractionTask], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for task in tasks {
        let record = ExampleRecord {
            file: task.origin.file.clone(),
            lemma: task.origin.lemma.clone(),
            line: task.origin.line,
            column: task.origin.column,
            assertion: task.assertion.clone(),
            context_lines: task.context.rendered_lines(),
            codebase_id: Some(task.codebase_id.clone()),
            necessary: Some(true),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads tasks back from JSON lines.
pub fn load_tasks(path: &Path) -> Result<Vec<ExtractionTask>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut tasks = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExampleRecord = serde_json::from_str(&line)?;
        let codebase_id = record.codebase_id.clone().unwrap_or_default();
        let (example, _) = record.into_example()?;
        tasks.push(ExtractionTask {
            origin: example.origin,
            assertion: example.assertion,
            context: example.context,
            codebase_id,
        });
    }
    Ok(tasks)
}
