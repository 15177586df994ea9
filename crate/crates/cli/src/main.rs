//! `ngramkit` — build, query, inspect, and evaluate compact trigram models.
//!
//! One binary, five subcommands: `build` turns a corpus into the three model
//! files, `suggest` answers `context words|prefix` queries, `evaluate` runs
//! the typing simulation against a test set, `inspect` dumps headers and
//! tables, and `bench` adds load-time and per-query timings to a report.
//!
//! Exit codes are part of the interface: 0 on success, 1 for a bad
//! invocation (flags, manifest keys, out-of-range values), 2 when the data
//! an invocation points at is missing, unreadable, or malformed.

use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ngramkit::engine::{load_model, EngineError, ModelPaths};
use ngramkit::evalkit::{self, EvalError, TestSet};
use ngramkit::pipeline::{build_model, PipelineError};
use ngramkit::{Engine, EngineConfig, PrepConfig, ScoreBranch};

mod inspect;
mod manifest;

#[derive(Parser)]
#[command(
    name = "ngramkit",
    version,
    about = "Compact trigram language models for predictive text",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data or format error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the .vocab/.ngram/.class model files from a corpus
    Build(manifest::BuildArgs),
    /// Print ranked suggestions for "context words|prefix" queries
    Suggest(SuggestArgs),
    /// Run the typing simulation against a test set
    Evaluate(EvaluateArgs),
    /// Dump model headers, section sizes, and table entries
    Inspect(inspect::InspectArgs),
    /// Evaluate plus model load-time and per-query timings
    Bench(BenchArgs),
}

/// Errors carry the exit-code contract: bad invocations exit 1, problems
/// with the pointed-at data exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage_error(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

pub fn data_error(message: impl Into<String>) -> CliError {
    CliError::Data(message.into())
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> CliError {
        match e {
            PipelineError::Config(msg) => usage_error(msg),
            other => data_error(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> CliError {
        match e {
            EngineError::BadConfig(msg) => usage_error(msg),
            other => data_error(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match e {
            EvalError::TooFewTrials(_) => usage_error(e.to_string()),
            EvalError::Engine(inner) => inner.into(),
            other => data_error(other.to_string()),
        }
    }
}

/// Dying silently on a closed pipe (`ngramkit inspect m | head`) beats the
/// default Rust behavior of panicking mid-print.
#[cfg(unix)]
fn reset_sigpipe() {
    // SAFETY: restoring a default signal disposition has no preconditions.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 0 for --help/--version and 2 for everything else;
        // remap the latter onto this binary's usage code.
        Err(e) if e.exit_code() == 0 => {
            print!("{}", e.render());
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{}", e.render());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Suggest(args) => cmd_suggest(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Inspect(args) => inspect::cmd_inspect(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

pub fn read_named(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| data_error(format!("cannot read {}: {e}", path.display())))
}

fn cmd_build(args: manifest::BuildArgs) -> CliResult<()> {
    let build = args.resolve()?;

    let mut corpus = String::new();
    for path in &build.corpus {
        corpus.push_str(&read_named(path)?);
        if !corpus.ends_with('\n') {
            corpus.push('\n');
        }
    }
    let lexicon = build.lexicon.as_deref().map(read_named).transpose()?;

    if let Some(parent) = build.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| data_error(format!("cannot create {}: {e}", parent.display())))?;
    }
    let (paths, report) = build_model(
        corpus.as_bytes(),
        lexicon.as_deref().map(str::as_bytes),
        &build.options,
        &build.output,
    )?;

    println!("{report}");
    println!("wrote {}", paths.vocab.display());
    println!("wrote {}", paths.ngram.display());
    if let Some(class) = &paths.class {
        println!("wrote {}", class.display());
    }
    Ok(())
}

#[derive(Args)]
struct SuggestArgs {
    /// Model basename (the part before .vocab/.ngram/.class)
    model: PathBuf,
    /// One query of the form "context words|prefix"; when absent, queries
    /// are read from stdin, one per line, until EOF
    query: Option<String>,
    /// Read queries from stdin even though one was given on the command line
    #[arg(short, long, conflicts_with = "query")]
    interactive: bool,
    /// Suggestion-list length, 1-9
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Override the backoff factor stored in the model, (0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the class-interpolation ratio stored in the model, [0, 1]
    #[arg(long)]
    r: Option<f64>,
}

fn engine_config(k: usize, lambda: Option<f64>, r: Option<f64>) -> CliResult<EngineConfig> {
    if !(1..=9).contains(&k) {
        return Err(usage_error(format!("k must be between 1 and 9, got {k}")));
    }
    if let Some(l) = lambda {
        if !(l > 0.0 && l <= 1.0) {
            return Err(usage_error(format!("lambda must lie in (0, 1], got {l}")));
        }
    }
    if let Some(r) = r {
        if !(0.0..=1.0).contains(&r) {
            return Err(usage_error(format!("r must lie in [0, 1], got {r}")));
        }
    }
    Ok(EngineConfig { k, lambda, r })
}

fn cmd_suggest(args: SuggestArgs) -> CliResult<()> {
    let config = engine_config(args.k, args.lambda, args.r)?;
    let paths = ModelPaths::for_base_lenient(&args.model);
    let engine = load_model(&paths, &config)?;

    match (args.interactive, args.query) {
        (false, Some(query)) => print_suggestions(&engine, &query),
        _ => {
            for line in io::stdin().lock().lines() {
                let line = line.map_err(|e| data_error(format!("stdin: {e}")))?;
                if line.trim().is_empty() {
                    continue;
                }
                print_suggestions(&engine, &line);
                println!();
            }
        }
    }
    Ok(())
}

fn branch_label(branch: ScoreBranch) -> &'static str {
    match branch {
        ScoreBranch::Tri => "trigram",
        ScoreBranch::Bi => "bigram",
        ScoreBranch::ClassUni => "class+unigram",
    }
}

/// Answers one `context words|prefix` line. No `|`, or nothing after it,
/// means next-word prediction; a non-empty prefix means word completion.
fn print_suggestions(engine: &Engine, query: &str) {
    let query = query.to_lowercase();
    let (ctx, prefix) = match query.split_once('|') {
        Some((ctx, prefix)) => (ctx, prefix.trim()),
        None => (query.as_str(), ""),
    };
    let ctx: Vec<&str> = ctx.split_whitespace().collect();
    let suggestions = if prefix.is_empty() {
        engine.next_word_prediction(&ctx)
    } else {
        engine.word_completion(&ctx, prefix)
    };
    if suggestions.is_empty() {
        println!("(no suggestions)");
        return;
    }
    for (rank, s) in suggestions.iter().enumerate() {
        println!("{:>2}  {:<24} {:>12.5e}  {}", rank + 1, s.word, s.score, branch_label(s.branch));
    }
}

/// Builds a test set that keeps every word exactly as typed: no rare-word
/// tagging and no blacklist, so the report reflects the text itself.
fn load_testset(path: &Path) -> CliResult<TestSet> {
    let text = read_named(path)?;
    let prep = PrepConfig { rare_threshold: 1, ..PrepConfig::default() };
    let testset = TestSet::from_text(&text, &prep);
    if testset.stats().words == 0 {
        return Err(data_error(format!("{}: test set contains no words", path.display())));
    }
    Ok(testset)
}

fn write_kv_report(path: &Path, report: &evalkit::EvalReport) -> CliResult<()> {
    fs::write(path, report.to_kv())
        .map_err(|e| data_error(format!("cannot write {}: {e}", path.display())))
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model basename
    model: PathBuf,
    /// Test set: UTF-8 text, one sentence per line
    testset: PathBuf,
    /// Suggestion-list length, 1-9
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Override the backoff factor stored in the model, (0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the class-interpolation ratio stored in the model, [0, 1]
    #[arg(long)]
    r: Option<f64>,
    /// Also write the machine-readable `key = value` report here
    #[arg(long)]
    report: Option<PathBuf>,
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult<()> {
    let config = engine_config(args.k, args.lambda, args.r)?;
    let testset = load_testset(&args.testset)?;
    let paths = ModelPaths::for_base_lenient(&args.model);
    let report = evalkit::evaluate_files(&paths, &config, &testset)?;
    print!("{report}");
    if let Some(path) = &args.report {
        write_kv_report(path, &report)?;
    }
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// Model basename
    model: PathBuf,
    /// Test set: UTF-8 text, one sentence per line
    testset: PathBuf,
    /// Suggestion-list length, 1-9
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Model-load repetitions behind the load-time figures, at least 3
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Override the backoff factor stored in the model, (0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the class-interpolation ratio stored in the model, [0, 1]
    #[arg(long)]
    r: Option<f64>,
    /// Also write the machine-readable `key = value` report here
    #[arg(long)]
    report: Option<PathBuf>,
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    if args.trials < 3 {
        return Err(usage_error(format!("benchmarks need at least 3 trials, got {}", args.trials)));
    }
    let config = engine_config(args.k, args.lambda, args.r)?;
    let testset = load_testset(&args.testset)?;
    let paths = ModelPaths::for_base_lenient(&args.model);
    let report = evalkit::bench(&paths, &config, &testset, args.trials)?;
    print!("{report}");
    if let Some(path) = &args.report {
        write_kv_report(path, &report)?;
    }
    Ok(())
}
