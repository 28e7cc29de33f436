//! Command-line surface for the assertion-repair toolkit.
//!
//! Exit codes: 0 success; 1 repair or bench found no fix; 2 usage error;
//! 3 backend or infrastructure failure.

use anyhow::{anyhow, Context as _};
use asserthint::config::{Config, LlmKind, VerifierKind};
use asserthint::driver::{
    localize_lemma, preview_prompt, repair, run_bench, BenchOptions, BenchResult, RepairConfig,
    VariantSpec,
};
use asserthint::extraction::{ablate_and_verify, load_tasks, save_tasks, ExtractionOptions};
use asserthint::selection::{
    build_bank, load_bank, proof_sim_rank, save_bank, select_examples, tfidf_rank, ExampleBank,
    SelectionStrategy,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "asserthint",
    version,
    about = "Generates missing proof-hint assertions for SMT-verified lemmas",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for every randomized choice (random example selection).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Verifier backend.
    #[arg(long, global = true, value_enum)]
    verifier: Option<BackendChoice>,

    /// LLM backend.
    #[arg(long, global = true, value_enum)]
    llm: Option<BackendChoice>,

    /// Fixture for the mock verifier.
    #[arg(long, global = true)]
    verifier_fixture: Option<PathBuf>,

    /// Fixture for the mock LLM.
    #[arg(long, global = true)]
    llm_fixture: Option<PathBuf>,

    /// Worker bound for extraction and bench pools (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Prompt order of in-context examples.
    #[arg(long, global = true, value_enum)]
    example_order: Option<OrderChoice>,

    /// How a faulty-branch excerpt pointing at an `if` line is read.
    #[arg(long, global = true, value_enum)]
    branch_reading: Option<BranchChoice>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderChoice {
    /// Least similar first (most similar adjacent to the query).
    Asc,
    /// Most similar first.
    Desc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BranchChoice {
    Then,
    Else,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrictChoice {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Real,
    Mock,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Baseline,
    Error,
    Iterative,
    Placeholder,
    PlaceholderError,
    Similarity,
    Tfidf,
    Random,
    SimilarityNoPlaceholder,
}

impl Variant {
    fn setup(self, seed: u64) -> (VariantSpec, SelectionStrategy, bool) {
        let sim = SelectionStrategy::ProofSimilarity;
        match self {
            Variant::Baseline => (VariantSpec::baseline(), sim, false),
            Variant::Error => (VariantSpec::error(), sim, false),
            Variant::Iterative => (VariantSpec::baseline(), sim, true),
            Variant::Placeholder => (VariantSpec::placeholder(), sim, false),
            Variant::PlaceholderError => (VariantSpec::placeholder_error(), sim, false),
            Variant::Similarity => (VariantSpec::with_examples(), sim, false),
            Variant::Tfidf => (
                VariantSpec::with_examples(),
                SelectionStrategy::TfIdf,
                false,
            ),
            Variant::Random => (
                VariantSpec::with_examples(),
                SelectionStrategy::Random { seed },
                false,
            ),
            Variant::SimilarityNoPlaceholder => {
                (VariantSpec::examples_no_placeholder(), sim, false)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Proofsim,
    Tfidf,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Build benchmark tasks by ablating assertions and re-verifying.
    Extract(ExtractArgs),
    /// Mine the in-context example bank from a codebase.
    Bank(BankArgs),
    /// Print candidate placeholder locations for a failing lemma.
    Localize(LocalizeArgs),
    /// Rank bank examples against a target lemma.
    Similar(SimilarArgs),
    /// Print the exact prompt the repair loop would send, without an LLM call.
    Prompt(PromptArgs),
    /// Run the full localize-select-prompt-verify repair loop on one lemma.
    Repair(RepairArgs),
    /// Run the repair loop over extracted tasks and emit the solved curve.
    Bench(BenchArgs),
    /// Turn a bench result into curve CSV for plotting.
    Report(ReportArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Codebase root to scan.
    #[arg(long)]
    codebase: PathBuf,
    /// Output task file (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Where to write the extraction report (JSON); stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BankArgs {
    /// Codebase root to scan.
    #[arg(long)]
    codebase: PathBuf,
    /// Output bank file (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LocalizeArgs {
    /// File containing the failing lemma.
    file: PathBuf,
    /// Lemma (or method) name.
    #[arg(long)]
    lemma: String,
}

#[derive(Args)]
struct SimilarArgs {
    /// File containing the target lemma.
    file: PathBuf,
    #[arg(long)]
    lemma: String,
    /// Example bank (built with `bank`).
    #[arg(long)]
    bank: PathBuf,
    /// How many examples to show.
    #[arg(short, default_value_t = 6)]
    m: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Proofsim)]
    strategy: Strategy,
    /// Place the placeholder before this 1-based file line instead of
    /// localizing via the verifier.
    #[arg(long)]
    placeholder_line: Option<usize>,
}

#[derive(Args)]
struct PromptArgs {
    file: PathBuf,
    #[arg(long)]
    lemma: String,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Variant::Similarity)]
    variant: Variant,
    /// In-context examples per prompt (overrides config).
    #[arg(short)]
    m: Option<usize>,
}

#[derive(Args)]
struct RepairArgs {
    file: PathBuf,
    #[arg(long)]
    lemma: String,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Variant::Similarity)]
    variant: Variant,
    /// Attempt budget (overrides config).
    #[arg(short)]
    k: Option<usize>,
    /// In-context examples per prompt (overrides config).
    #[arg(short)]
    m: Option<usize>,
    /// Localization candidate to use.
    #[arg(long)]
    candidate: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Task file from `extract`.
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    bank: PathBuf,
    /// Root the task file paths are relative to.
    #[arg(long)]
    codebase: PathBuf,
    #[arg(long, value_enum, default_value_t = Variant::Similarity)]
    variant: Variant,
    /// Result JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Keep infrastructure failures in the success-rate denominator.
    #[arg(long, value_enum, default_value_t = StrictChoice::On)]
    strict_denominator: StrictChoice,
    #[arg(short)]
    k: Option<usize>,
    #[arg(short)]
    m: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Bench result JSON.
    #[arg(long)]
    bench: PathBuf,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    std::process::exit(code);
}

/// 2 for usage/authoring mistakes, 3 for infrastructure failures.
fn classify(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<asserthint::Error>() {
        Some(e) if e.is_infrastructure() => 3,
        Some(_) => 2,
        None => 2,
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(choice) = cli.verifier {
        config.verifier.backend = match choice {
            BackendChoice::Real => VerifierKind::Real,
            BackendChoice::Mock => VerifierKind::Mock,
        };
    }
    if let Some(choice) = cli.llm {
        config.llm.backend = match choice {
            BackendChoice::Real => LlmKind::Real,
            BackendChoice::Mock => LlmKind::Mock,
        };
    }
    if let Some(path) = &cli.verifier_fixture {
        config.verifier.fixture = Some(path.clone());
    }
    if let Some(path) = &cli.llm_fixture {
        config.llm.fixture = Some(path.clone());
    }
    Ok(config)
}

fn repair_config(cli: &Cli, config: &Config, variant: Variant) -> RepairConfig {
    let (spec, strategy, iterative) = variant.setup(cli.seed);
    let mut rc = config.repair_config(spec, strategy);
    rc.iterative = rc.iterative || iterative;
    if let Some(order) = cli.example_order {
        rc.example_order = match order {
            OrderChoice::Asc => asserthint::selection::ExampleOrder::AscendingSimilarity,
            OrderChoice::Desc => asserthint::selection::ExampleOrder::DescendingSimilarity,
        };
    }
    if let Some(reading) = cli.branch_reading {
        rc.branch_reading = match reading {
            BranchChoice::Then => asserthint::localization::BranchReading::ThenOnIfLine,
            BranchChoice::Else => asserthint::localization::BranchReading::ElseOnIfLine,
        };
    }
    rc
}

fn load_bank_arg(path: Option<&PathBuf>) -> anyhow::Result<ExampleBank> {
    match path {
        Some(p) => Ok(load_bank(p).with_context(|| format!("loading bank {}", p.display()))?),
        None => Ok(ExampleBank::default()),
    }
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Extract(args) => cmd_extract(cli, &config, args),
        Command::Bank(args) => cmd_bank(cli, args),
        Command::Localize(args) => cmd_localize(cli, &config, args),
        Command::Similar(args) => cmd_similar(cli, &config, args),
        Command::Prompt(args) => cmd_prompt(cli, &config, args),
        Command::Repair(args) => cmd_repair(cli, &config, args),
        Command::Bench(args) => cmd_bench(cli, &config, args),
        Command::Report(args) => cmd_report(cli, args),
    }
}

fn cmd_extract(cli: &Cli, config: &Config, args: &ExtractArgs) -> anyhow::Result<i32> {
    let verifier = config.build_verifier()?;
    let options = ExtractionOptions {
        jobs: cli.jobs,
        timeout: config.timeout(),
    };
    let (tasks, report) = ablate_and_verify(&args.codebase, verifier.as_ref(), &options)?;
    save_tasks(&tasks, &args.out)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    let report_json = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => std::fs::write(path, report_json + "\n")?,
        None => println!("{report_json}"),
    }
    eprintln!(
        "{} tasks written to {} ({} assertions scanned)",
        tasks.len(),
        args.out.display(),
        report.total_assertions_found
    );
    Ok(0)
}

fn cmd_bank(cli: &Cli, args: &BankArgs) -> anyhow::Result<i32> {
    let bank = build_bank(&args.codebase)?;
    for warning in &bank.warnings {
        eprintln!("warning: {warning}");
    }
    save_bank(&bank, &args.out)?;
    if cli.json {
        println!(
            "{}",
            serde_json::json!({"examples": bank.len(), "codebase_id": bank.codebase_id})
        );
    } else {
        eprintln!("{} examples written to {}", bank.len(), args.out.display());
    }
    Ok(0)
}

fn cmd_localize(cli: &Cli, config: &Config, args: &LocalizeArgs) -> anyhow::Result<i32> {
    let verifier = config.build_verifier()?;
    let rc = repair_config(cli, config, Variant::Placeholder);
    let result = localize_lemma(&args.file, &args.lemma, &rc, verifier.as_ref())?;
    for diagnostic in &result.diagnostics {
        eprintln!("note: {diagnostic}");
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&result.candidates)?);
    } else if result.candidates.is_empty() {
        println!("no candidate locations");
    } else {
        println!("{:<6} {:<8} block", "line", "column");
        for c in &result.candidates {
            println!("{:<6} {:<8} {:?}", c.line, c.column, c.block_kind);
        }
    }
    Ok(0)
}

fn target_context(
    cli: &Cli,
    config: &Config,
    file: &Path,
    lemma: &str,
    placeholder_line: Option<usize>,
) -> anyhow::Result<asserthint::context::ProofContext> {
    let source = std::fs::read_to_string(file).map_err(|e| asserthint::Error::io(file, e))?;
    let span = asserthint::context::find_lemma(&source, lemma)?;
    if let Some(file_line) = placeholder_line {
        if !span.contains_line(file_line) {
            return Err(anyhow!(
                "--placeholder-line {file_line} is outside lemma {lemma} ({}..{})",
                span.start_line,
                span.end_line
            ));
        }
        let lemma_text = span.text(&source);
        let rel = file_line - span.start_line + 1;
        let indent = source
            .lines()
            .nth(file_line - 1)
            .map(asserthint::context::indent_width)
            .unwrap_or(0);
        let loc = asserthint::localization::PlaceholderLocation {
            line: rel,
            indent,
            block: 0,
        };
        return Ok(asserthint::localization::splice_placeholder(
            &lemma_text,
            &loc,
        )?);
    }
    let verifier = config.build_verifier()?;
    let rc = repair_config(cli, config, Variant::Placeholder);
    let result = localize_lemma(file, lemma, &rc, verifier.as_ref())?;
    result
        .context
        .ok_or_else(|| anyhow!("no localizable violation; pass --placeholder-line"))
}

fn cmd_similar(cli: &Cli, config: &Config, args: &SimilarArgs) -> anyhow::Result<i32> {
    let bank = load_bank(&args.bank)?;
    let target = target_context(cli, config, &args.file, &args.lemma, args.placeholder_line)?;

    let ranked: Vec<(String, String, usize, Option<f64>)> = match args.strategy {
        Strategy::Proofsim => proof_sim_rank(&target, &bank)
            .into_iter()
            .take(args.m)
            .map(|(e, s)| {
                (
                    e.origin.file.clone(),
                    e.origin.lemma.clone(),
                    e.origin.line,
                    Some(s),
                )
            })
            .collect(),
        Strategy::Tfidf => tfidf_rank(&target, &bank)
            .into_iter()
            .take(args.m)
            .map(|(e, s)| {
                (
                    e.origin.file.clone(),
                    e.origin.lemma.clone(),
                    e.origin.line,
                    Some(s),
                )
            })
            .collect(),
        Strategy::Random => select_examples(
            &target,
            &bank,
            args.m,
            &SelectionStrategy::Random { seed: cli.seed },
            None,
            config.repair.example_order,
        )
        .into_iter()
        .map(|e| {
            (
                e.origin.file.clone(),
                e.origin.lemma.clone(),
                e.origin.line,
                None,
            )
        })
        .collect(),
    };

    if cli.json {
        let rows: Vec<serde_json::Value> = ranked
            .iter()
            .map(|(file, lemma, line, score)| {
                serde_json::json!({"file": file, "lemma": lemma, "line": line, "score": score})
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!("{:<5} {:<9} {:<34} location", "rank", "score", "lemma");
        for (i, (file, lemma, line, score)) in ranked.iter().enumerate() {
            let score = score
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|| "-".into());
            println!("{:<5} {:<9} {:<34} {}:{}", i + 1, score, lemma, file, line);
        }
    }
    Ok(0)
}

fn cmd_prompt(cli: &Cli, config: &Config, args: &PromptArgs) -> anyhow::Result<i32> {
    let bank = load_bank_arg(args.bank.as_ref())?;
    let verifier = config.build_verifier()?;
    let mut rc = repair_config(cli, config, args.variant);
    if let Some(m) = args.m {
        rc.m = m;
    }
    let prompt = preview_prompt(&args.file, &args.lemma, &bank, &rc, verifier.as_ref(), None)?;
    print!("{}", prompt.transcript());
    std::io::stdout().flush()?;
    Ok(0)
}

fn cmd_repair(cli: &Cli, config: &Config, args: &RepairArgs) -> anyhow::Result<i32> {
    let bank = load_bank_arg(args.bank.as_ref())?;
    let verifier = config.build_verifier()?;
    let llm = config.build_llm()?;
    let mut rc = repair_config(cli, config, args.variant);
    if let Some(k) = args.k {
        rc.k = k;
    }
    if let Some(m) = args.m {
        rc.m = m;
    }
    if let Some(c) = args.candidate {
        rc.candidate_index = c;
    }
    let outcome = repair(
        &args.file,
        &args.lemma,
        &bank,
        &rc,
        verifier.as_ref(),
        llm.as_ref(),
        None,
    )?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
    } else if outcome.success {
        println!(
            "repaired {} in {} attempt(s): {}",
            args.lemma,
            outcome.attempts_used,
            outcome.winning_assertion.as_deref().unwrap_or_default()
        );
    } else if !outcome.localizable {
        println!("could not localize a violation for {}", args.lemma);
    } else {
        println!(
            "no fix found for {} in {} attempt(s)",
            args.lemma, outcome.attempts_used
        );
    }
    Ok(if outcome.success { 0 } else { 1 })
}

fn cmd_bench(cli: &Cli, config: &Config, args: &BenchArgs) -> anyhow::Result<i32> {
    let tasks = load_tasks(&args.tasks)?;
    let bank = load_bank(&args.bank)?;
    let verifier = config.build_verifier()?;
    let llm = config.build_llm()?;
    let mut rc = repair_config(cli, config, args.variant);
    if let Some(k) = args.k {
        rc.k = k;
    }
    if let Some(m) = args.m {
        rc.m = m;
    }
    let options = BenchOptions {
        codebase_root: args.codebase.clone(),
        jobs: cli.jobs,
        strict_denominator: args.strict_denominator == StrictChoice::On,
    };
    let result = run_bench(
        &tasks,
        &bank,
        &rc,
        verifier.as_ref(),
        llm.as_ref(),
        &options,
    )?;
    std::fs::write(&args.out, result.to_json_pretty()? + "\n")?;

    let solved = result
        .tasks
        .iter()
        .filter(|t| t.outcome.as_ref().is_some_and(|o| o.success))
        .count();
    if cli.json {
        println!(
            "{}",
            serde_json::json!({"tasks": tasks.len(), "solved": solved, "curve": result.curve})
        );
    } else {
        println!(
            "solved {}/{} tasks; curve written to {}",
            solved,
            tasks.len(),
            args.out.display()
        );
    }
    Ok(if solved == 0 && !tasks.is_empty() {
        1
    } else {
        0
    })
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> anyhow::Result<i32> {
    let text =
        std::fs::read_to_string(&args.bench).map_err(|e| asserthint::Error::io(&args.bench, e))?;
    let result: BenchResult = serde_json::from_str(&text)?;
    let csv = result.curve_csv();
    match &args.csv {
        Some(path) => {
            std::fs::write(path, &csv)?;
            if !cli.json {
                eprintln!("curve written to {}", path.display());
            }
        }
        None => print!("{csv}"),
    }
    Ok(0)
}
