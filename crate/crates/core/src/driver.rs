//! The end-to-end repair loop and the benchmark harness.
//!
//! One repair run: verify the broken lemma to capture the error, localize a
//! placeholder position from the first violation, select in-context examples,
//! build the prompt, request the whole attempt budget of samples in one LLM
//! call, then splice and verify candidates in order, stopping at the first
//! one that verifies. Iterative mode re-prompts once with the latest error
//! and spends a second budget.

use crate::backends::{LlmBackend, LlmRequest, VerdictStatus, VerifierBackend};
use crate::context::{find_lemma, ProofContext};
use crate::extraction::ExtractionTask;
use crate::localization::{
    build_block_tree, candidate_locations, parse_errors_in, splice_placeholder, BranchReading,
    PlaceholderLocation, Violation,
};
use crate::prompting::{
    build_prompt, parse_completion, ChatPrompt, ErrorPosition, PromptExamples, PromptTarget,
    PromptVariant, SystemStyle,
};
use crate::selection::{
    select_examples, DemonstrationExample, ExampleBank, ExampleOrder, ExampleOrigin,
    SelectionStrategy,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Prompt shape, minus the examples themselves (those are selected per run).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub placeholder: bool,
    pub include_error: bool,
    pub with_examples: bool,
    pub system_style: SystemStyle,
}

impl VariantSpec {
    /// Only the broken lemma text.
    pub fn baseline() -> Self {
        VariantSpec {
            placeholder: false,
            include_error: false,
            with_examples: false,
            system_style: SystemStyle::Standard,
        }
    }

    /// Broken lemma plus the verifier error.
    pub fn error() -> Self {
        VariantSpec {
            include_error: true,
            ..Self::baseline()
        }
    }

    /// Lemma with an assertion placeholder.
    pub fn placeholder() -> Self {
        VariantSpec {
            placeholder: true,
            ..Self::baseline()
        }
    }

    /// Placeholder plus the verifier error.
    pub fn placeholder_error() -> Self {
        VariantSpec {
            include_error: true,
            ..Self::placeholder()
        }
    }

    /// Placeholder plus in-context examples (the selection strategy decides
    /// which: proof similarity, TF-IDF, or random).
    pub fn with_examples() -> Self {
        VariantSpec {
            with_examples: true,
            ..Self::placeholder()
        }
    }

    /// In-context examples without the placeholder.
    pub fn examples_no_placeholder() -> Self {
        VariantSpec {
            placeholder: false,
            with_examples: true,
            ..Self::placeholder()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Attempt budget per round.
    pub k: usize,
    /// In-context examples per prompt.
    pub m: usize,
    pub variant: VariantSpec,
    pub strategy: SelectionStrategy,
    pub example_order: ExampleOrder,
    /// Which localization candidate to use.
    pub candidate_index: usize,
    /// One extra round re-prompted with the latest error on failure.
    pub iterative: bool,
    pub branch_reading: BranchReading,
    pub error_position: ErrorPosition,
    pub timeout: Duration,
    pub model: String,
    pub temperature: f64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            k: 10,
            m: 6,
            variant: VariantSpec::with_examples(),
            strategy: SelectionStrategy::ProofSimilarity,
            example_order: ExampleOrder::default(),
            candidate_index: 0,
            iterative: false,
            branch_reading: BranchReading::default(),
            error_position: ErrorPosition::default(),
            timeout: Duration::from_secs(120),
            model: "gpt-4o".to_owned(),
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Verified,
    Failed,
    Timeout,
    Crashed,
    NoAssertion,
}

impl From<&VerdictStatus> for AttemptStatus {
    fn from(status: &VerdictStatus) -> Self {
        match status {
            VerdictStatus::Verified => AttemptStatus::Verified,
            VerdictStatus::Failed(_) => AttemptStatus::Failed,
            VerdictStatus::Timeout => AttemptStatus::Timeout,
            VerdictStatus::Crashed(_) => AttemptStatus::Crashed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// None when the completion contained no assertion.
    pub assertion: Option<String>,
    pub status: AttemptStatus,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub success: bool,
    pub winning_assertion: Option<String>,
    /// 1-based index of the first verified attempt, or the number of
    /// attempts consumed on failure.
    pub attempts_used: usize,
    pub attempts: Vec<AttemptRecord>,
    pub placeholder: Option<PlaceholderLocation>,
    pub prompt_fingerprint: Option<String>,
    /// False when no violation could be extracted from the error output.
    pub localizable: bool,
    /// Prompting rounds spent (2 in iterative mode when round one failed).
    pub rounds: usize,
}

impl RepairOutcome {
    fn not_localizable() -> Self {
        RepairOutcome {
            success: false,
            winning_assertion: None,
            attempts_used: 0,
            attempts: Vec::new(),
            placeholder: None,
            prompt_fingerprint: None,
            localizable: false,
            rounds: 0,
        }
    }
}

fn lemma_relative(violation: &Violation, lemma_start: usize) -> Violation {
    let shift = |line: usize| line + 1 - lemma_start;
    let mut v = violation.clone();
    v.failing_location.line = shift(v.failing_location.line);
    if let Some(r) = &mut v.related_location {
        r.line = shift(r.line);
    }
    if let Some(f) = &mut v.faulty_branch {
        f.line = shift(f.line);
    }
    v
}

struct PreparedTarget {
    work_file: PathBuf,
    file_lines: Vec<String>,
    lemma_start: usize,
    lemma_end: usize,
    lemma_text: String,
    location: PlaceholderLocation,
    context: ProofContext,
    baseline_output: String,
    _scratch: tempfile::TempDir,
}

/// Verify, parse, localize, splice. `Ok(Err(outcome))` means the pipeline
/// stopped cleanly without a localizable violation.
fn prepare_target(
    file: &Path,
    lemma_name: &str,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
) -> Result<std::result::Result<PreparedTarget, RepairOutcome>> {
    let source = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    let span = find_lemma(&source, lemma_name)?;
    let lemma_text = span.text(&source);

    let scratch = tempfile::tempdir().map_err(|e| Error::io(file, e))?;
    let parent = file.parent().unwrap_or_else(|| Path::new("."));
    copy_dir_files(parent, scratch.path())?;
    let file_name = file
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", file.display())))?;
    let work_file = scratch.path().join(file_name);

    let baseline = verifier.verify(&work_file, Some(lemma_name), config.timeout);
    match &baseline.status {
        VerdictStatus::Verified => return Err(Error::AlreadyVerifies(lemma_name.to_owned())),
        VerdictStatus::Timeout => {
            return Err(Error::VerifierInfra(
                "baseline verification timed out".into(),
            ))
        }
        VerdictStatus::Crashed(detail) => {
            return Err(Error::VerifierInfra(format!("baseline crashed: {detail}")))
        }
        VerdictStatus::Failed(_) => {}
    }
    let baseline_output = baseline.status.output().to_owned();

    let parsed = parse_errors_in(&baseline_output, &file.display().to_string(), &source);
    let violation = parsed.violations.iter().find(|v| {
        span.contains_line(v.failing_location.line)
            || v.related_location
                .as_ref()
                .is_some_and(|r| span.contains_line(r.line))
    });
    let Some(violation) = violation else {
        return Ok(Err(RepairOutcome::not_localizable()));
    };

    let local = lemma_relative(violation, span.start_line);
    let tree = build_block_tree(&lemma_text)?;
    let candidates = candidate_locations(&tree, &local, config.branch_reading, &lemma_text);
    if candidates.locations.is_empty() {
        return Ok(Err(RepairOutcome::not_localizable()));
    }
    let location = *candidates.locations.get(config.candidate_index).ok_or(
        Error::CandidateIndexOutOfRange {
            index: config.candidate_index,
            available: candidates.locations.len(),
        },
    )?;
    let context = splice_placeholder(&lemma_text, &location)?;

    Ok(Ok(PreparedTarget {
        work_file,
        file_lines: source.lines().map(str::to_owned).collect(),
        lemma_start: span.start_line,
        lemma_end: span.end_line,
        lemma_text,
        location,
        context,
        baseline_output,
        _scratch: scratch,
    }))
}

fn copy_dir_files(from: &Path, to: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::VerifierInfra(format!("scan failed: {e}")))?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walkdir stays under its root");
        if rel.as_os_str().is_empty() {
            continue;
        }
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
    }
    Ok(())
}

/// The whole file with the lemma's lines replaced by a repaired rendering.
fn file_with_lemma(prepared: &PreparedTarget, lemma_body: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    out.extend(
        prepared.file_lines[..prepared.lemma_start - 1]
            .iter()
            .map(String::as_str),
    );
    out.extend(lemma_body.lines());
    out.extend(
        prepared.file_lines[prepared.lemma_end..]
            .iter()
            .map(String::as_str),
    );
    out.join("\n")
}

/// One candidate placeholder position in file coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizedCandidate {
    pub line: usize,
    pub column: usize,
    pub block_kind: crate::localization::BlockKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaLocalization {
    pub candidates: Vec<LocalizedCandidate>,
    pub diagnostics: Vec<String>,
    /// The context spliced at the configured candidate, when one exists.
    #[serde(skip)]
    pub context: Option<ProofContext>,
}

/// Verifies a failing lemma in place (read-only) and reports its candidate
/// placeholder locations.
pub fn localize_lemma(
    file: &Path,
    lemma_name: &str,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
) -> Result<LemmaLocalization> {
    let source = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    let span = find_lemma(&source, lemma_name)?;
    let lemma_text = span.text(&source);

    let verdict = verifier.verify(file, Some(lemma_name), config.timeout);
    let output = match &verdict.status {
        VerdictStatus::Verified => return Err(Error::AlreadyVerifies(lemma_name.to_owned())),
        VerdictStatus::Timeout => {
            return Err(Error::VerifierInfra("verification timed out".into()))
        }
        VerdictStatus::Crashed(detail) => {
            return Err(Error::VerifierInfra(format!("verifier crashed: {detail}")))
        }
        VerdictStatus::Failed(output) => output.clone(),
    };

    let parsed = parse_errors_in(&output, &file.display().to_string(), &source);
    let mut result = LemmaLocalization {
        candidates: Vec::new(),
        diagnostics: parsed.diagnostics.clone(),
        context: None,
    };
    let violation = parsed.violations.iter().find(|v| {
        span.contains_line(v.failing_location.line)
            || v.related_location
                .as_ref()
                .is_some_and(|r| span.contains_line(r.line))
    });
    let Some(violation) = violation else {
        result
            .diagnostics
            .push("no violation falls inside the lemma".to_owned());
        return Ok(result);
    };

    let local = lemma_relative(violation, span.start_line);
    let tree = build_block_tree(&lemma_text)?;
    let set = candidate_locations(&tree, &local, config.branch_reading, &lemma_text);
    result.diagnostics.extend(set.diagnostics);
    result.candidates = set
        .locations
        .iter()
        .map(|loc| LocalizedCandidate {
            line: span.start_line + loc.line - 1,
            column: loc.indent + 1,
            block_kind: tree.block(loc.block).kind,
        })
        .collect();
    if let Some(loc) = set.locations.get(config.candidate_index) {
        result.context = Some(splice_placeholder(&lemma_text, loc)?);
    }
    Ok(result)
}

/// Builds the exact prompt `repair` would send for this file and
/// configuration, without calling the LLM.
pub fn preview_prompt(
    file: &Path,
    lemma_name: &str,
    bank: &ExampleBank,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
    exclude: Option<&ExampleOrigin>,
) -> Result<ChatPrompt> {
    match prepare_target(file, lemma_name, config, verifier)? {
        Ok(prepared) => assemble_prompt(&prepared, bank, config, exclude, None),
        Err(_) => Err(Error::Config(
            "no localizable violation; cannot build a prompt".into(),
        )),
    }
}

fn assemble_prompt(
    prepared: &PreparedTarget,
    bank: &ExampleBank,
    config: &RepairConfig,
    exclude: Option<&ExampleOrigin>,
    error_override: Option<&str>,
) -> Result<ChatPrompt> {
    let examples: Vec<&DemonstrationExample> = if config.variant.with_examples {
        select_examples(
            &prepared.context,
            bank,
            config.m,
            &config.strategy,
            exclude,
            config.example_order,
        )
    } else {
        Vec::new()
    };
    let include_error = config.variant.include_error || error_override.is_some();
    let variant = PromptVariant {
        placeholder: config.variant.placeholder,
        include_error,
        examples: if examples.is_empty() {
            PromptExamples::None
        } else {
            PromptExamples::Provided(examples)
        },
        system_style: config.variant.system_style,
        error_position: config.error_position,
    };
    let target = if config.variant.placeholder {
        PromptTarget::Context(&prepared.context)
    } else {
        PromptTarget::Raw(&prepared.lemma_text)
    };
    let error_text = error_override.or(include_error.then_some(prepared.baseline_output.as_str()));
    build_prompt(&target, &variant, error_text)
}

/// Repairs one broken lemma. The file is taken as already failing; a lemma
/// that verifies up front is a vacuous task and an error. Candidate
/// verification happens on scratch copies, never on the input.
pub fn repair(
    file: &Path,
    lemma_name: &str,
    bank: &ExampleBank,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
    llm: &dyn LlmBackend,
    exclude: Option<&ExampleOrigin>,
) -> Result<RepairOutcome> {
    let prepared = match prepare_target(file, lemma_name, config, verifier)? {
        Ok(p) => p,
        Err(outcome) => return Ok(outcome),
    };

    let mut outcome = RepairOutcome {
        success: false,
        winning_assertion: None,
        attempts_used: 0,
        attempts: Vec::new(),
        placeholder: Some(prepared.location),
        prompt_fingerprint: None,
        localizable: true,
        rounds: 0,
    };

    let max_rounds = if config.iterative { 2 } else { 1 };
    let mut last_error: Option<String> = None;
    for round in 0..max_rounds {
        let prompt = assemble_prompt(&prepared, bank, config, exclude, last_error.as_deref())?;
        if round == 0 {
            outcome.prompt_fingerprint = Some(prompt.fingerprint());
        }
        outcome.rounds = round + 1;

        let response = llm.complete(&LlmRequest {
            prompt,
            n_samples: config.k,
            temperature: config.temperature,
            model: config.model.clone(),
        })?;

        for completion in &response.completions {
            let Some(assertion) = parse_completion(completion) else {
                outcome.attempts.push(AttemptRecord {
                    assertion: None,
                    status: AttemptStatus::NoAssertion,
                    duration_ms: 0,
                });
                continue;
            };
            let candidate = file_with_lemma(&prepared, &prepared.context.substitute(&assertion));
            std::fs::write(&prepared.work_file, candidate)
                .map_err(|e| Error::io(&prepared.work_file, e))?;
            let verdict = verifier.verify(&prepared.work_file, Some(lemma_name), config.timeout);
            outcome.attempts.push(AttemptRecord {
                assertion: Some(assertion.clone()),
                status: AttemptStatus::from(&verdict.status),
                duration_ms: verdict.duration.as_millis() as u64,
            });
            match verdict.status {
                VerdictStatus::Verified => {
                    outcome.success = true;
                    outcome.winning_assertion = Some(assertion);
                    break;
                }
                VerdictStatus::Failed(output) => last_error = Some(output),
                _ => {}
            }
        }
        if outcome.success {
            break;
        }
    }

    outcome.attempts_used = if outcome.success {
        outcome
            .attempts
            .iter()
            .position(|a| a.status == AttemptStatus::Verified)
            .map(|i| i + 1)
            .unwrap_or(outcome.attempts.len())
    } else {
        outcome.attempts.len()
    };
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTaskOutcome {
    pub origin: ExampleOrigin,
    pub codebase_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<RepairOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infra_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub k: usize,
    pub strict_denominator: bool,
    pub denominator: usize,
    /// Fraction of tasks solved within k' attempts, for k' = 1..=k.
    pub curve: Vec<f64>,
    pub per_codebase: BTreeMap<String, Vec<f64>>,
    pub tasks: Vec<BenchTaskOutcome>,
}

impl BenchResult {
    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Curve as CSV: one row per attempt budget, one column per codebase plus
    /// the overall fraction.
    pub fn curve_csv(&self) -> String {
        let mut header = vec!["k".to_owned(), "overall".to_owned()];
        header.extend(self.per_codebase.keys().cloned());
        let mut rows = vec![header.join(",")];
        for i in 0..self.k {
            let mut row = vec![(i + 1).to_string(), format!("{:.6}", self.curve[i])];
            for curve in self.per_codebase.values() {
                row.push(format!("{:.6}", curve[i]));
            }
            rows.push(row.join(","));
        }
        rows.join("\n") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Root the task file paths are relative to.
    pub codebase_root: PathBuf,
    /// Task-level worker bound; 0 means the library default.
    pub jobs: usize,
    /// Count infrastructure failures in the denominator (the default) or
    /// drop them from it.
    pub strict_denominator: bool,
}

fn solved_curve(outcomes: &[&BenchTaskOutcome], k: usize, denominator: usize) -> Vec<f64> {
    (1..=k)
        .map(|budget| {
            let solved = outcomes
                .iter()
                .filter(|t| {
                    t.outcome
                        .as_ref()
                        .is_some_and(|o| o.success && o.attempts_used <= budget)
                })
                .count();
            if denominator == 0 {
                0.0
            } else {
                solved as f64 / denominator as f64
            }
        })
        .collect()
}

fn bench_one_task(
    task: &ExtractionTask,
    bank: &ExampleBank,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
    llm: &dyn LlmBackend,
    options: &BenchOptions,
) -> BenchTaskOutcome {
    let mut result = BenchTaskOutcome {
        origin: task.origin.clone(),
        codebase_id: task.codebase_id.clone(),
        outcome: None,
        infra_error: None,
    };
    let run = || -> Result<RepairOutcome> {
        let file = options.codebase_root.join(&task.origin.file);
        let source = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let lines: Vec<&str> = source.lines().collect();
        let target_line = lines.get(task.origin.line - 1).map(|l| l.trim());
        if target_line != Some(task.assertion.trim()) {
            return Err(Error::Config(format!(
                "stale task: {}:{} does not hold `{}`",
                task.origin.file, task.origin.line, task.assertion
            )));
        }
        let broken: Vec<&str> = lines
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 1 != task.origin.line)
            .map(|(_, l)| *l)
            .collect();

        let scratch = tempfile::tempdir().map_err(|e| Error::io(&file, e))?;
        let parent = file.parent().unwrap_or_else(|| Path::new("."));
        copy_dir_files(parent, scratch.path())?;
        let work = scratch.path().join(file.file_name().unwrap_or_default());
        std::fs::write(&work, broken.join("\n")).map_err(|e| Error::io(&work, e))?;

        repair(
            &work,
            &task.origin.lemma,
            bank,
            config,
            verifier,
            llm,
            Some(&task.origin),
        )
    };
    match run() {
        Ok(outcome) => result.outcome = Some(outcome),
        Err(e) => result.infra_error = Some(e.to_string()),
    }
    result
}

/// Runs the repair loop over a task list, bounded parallelism across tasks
/// and strictly sequential verification within each task. Each task's own
/// assertion is excluded from the bank for its run.
pub fn run_bench(
    tasks: &[ExtractionTask],
    bank: &ExampleBank,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
    llm: &dyn LlmBackend,
    options: &BenchOptions,
) -> Result<BenchResult> {
    let task_outcomes = run_tasks(tasks, bank, config, verifier, llm, options);

    let counted: Vec<&BenchTaskOutcome> = task_outcomes
        .iter()
        .filter(|t| options.strict_denominator || t.infra_error.is_none())
        .collect();
    let denominator = counted.len();
    let curve = solved_curve(&counted, config.k, denominator);

    let mut per_codebase = BTreeMap::new();
    let mut by_id: BTreeMap<&str, Vec<&BenchTaskOutcome>> = BTreeMap::new();
    for outcome in &counted {
        by_id
            .entry(outcome.codebase_id.as_str())
            .or_default()
            .push(outcome);
    }
    for (id, group) in by_id {
        per_codebase.insert(id.to_owned(), solved_curve(&group, config.k, group.len()));
    }

    Ok(BenchResult {
        k: config.k,
        strict_denominator: options.strict_denominator,
        denominator,
        curve,
        per_codebase,
        tasks: task_outcomes,
    })
}

#[cfg(feature = "parallel")]
fn run_tasks(
    tasks: &[ExtractionTask],
    bank: &ExampleBank,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
    llm: &dyn LlmBackend,
    options: &BenchOptions,
) -> Vec<BenchTaskOutcome> {
    let work = || {
        tasks
            .par_iter()
            .map(|t| bench_one_task(t, bank, config, verifier, llm, options))
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
fn run_tasks(
    tasks: &[ExtractionTask],
    bank: &ExampleBank,
    config: &RepairConfig,
    verifier: &dyn VerifierBackend,
    llm: &dyn LlmBackend,
    options: &BenchOptions,
) -> Vec<BenchTaskOutcome> {
    tasks
        .iter()
        .map(|t| bench_one_task(t, bank, config, verifier, llm, options))
        .collect()
}
