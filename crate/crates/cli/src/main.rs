//! `qpc`: run scenarios, batteries and single-run transcripts.
//!
//! Exit status: 0 success, 1 usage or config error, 2 runtime error,
//! 3 acceptance-suite failure. Errors go to stderr as one JSON object.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qpc_core::config::{ConfigDocument, ConfigError, OutputFormat};
use qpc_core::harness::{run_scenario, run_suite, run_trial, HarnessError, SUITES};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qpc", version, about = "Quantum private comparison simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its statistics.
    Run(RunArgs),
    /// Run a built-in battery and print a pass/fail table.
    Suite(SuiteArgs),
    /// Write the full transcript of a single-trial scenario.
    Transcript(TranscriptArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct SuiteArgs {
    name: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct TranscriptArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Config(ConfigError),
    Runtime(String),
    Suite,
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Suite => 3,
        }
    }

    fn report(&self) -> serde_json::Value {
        match self {
            Failure::Usage(message) => json!({"error": {"category": "usage", "message": message}}),
            Failure::Config(e) => json!({"error": {
                "category": "config",
                "kind": e.kind,
                "field": e.field,
                "message": e.to_string(),
            }}),
            Failure::Runtime(message) => json!({"error": {"category": "runtime", "message": message}}),
            Failure::Suite => json!({"error": {"category": "suite", "message": "one or more acceptance rows failed"}}),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match &e {
            HarnessError::UnknownSuite(_) | HarnessError::UnknownClosedForm(_) => Failure::Usage(e.to_string()),
            _ if e.is_config_error() => Failure::Config(ConfigError {
                kind: qpc_core::config::ConfigErrorKind::Scenario,
                field: e.field(),
                message: e.to_string(),
            }),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn jobs(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// The given seed, or a fresh one announced on stderr.
fn seed_or_draw(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut doc = ConfigDocument::load(&args.config).map_err(Failure::Config)?;
    if let Some(t) = args.trials {
        doc.trials = t;
    }
    if args.seed.is_some() {
        doc.seed = args.seed;
    }
    let seed = seed_or_draw(doc.seed);
    let scenario = doc.to_scenario(seed).map_err(Failure::Config)?;
    let stats = run_scenario(&scenario, jobs(args.jobs))?;
    let output = doc.output.clone().unwrap_or_default();
    let format = args.format.or(output.format).unwrap_or_default();
    let text = match format {
        OutputFormat::Json => stats.to_json().map_err(runtime)? + "\n",
        OutputFormat::Csv => stats.to_csv()?,
    };
    emit(args.out.as_deref().or(output.path.as_deref()), &text)
}

fn cmd_suite(args: SuiteArgs) -> Result<(), Failure> {
    if !SUITES.contains(&args.name.as_str()) {
        return Err(Failure::Usage(format!("unknown suite `{}` (available: {})", args.name, SUITES.join(", "))));
    }
    let seed = seed_or_draw(args.seed);
    let report = run_suite(&args.name, seed, jobs(args.jobs))?;
    print!("{}", report.render());
    if let Some(out) = &args.out {
        let text = match args.format.unwrap_or_default() {
            OutputFormat::Json => report.to_json().map_err(runtime)? + "\n",
            OutputFormat::Csv => report.to_csv()?,
        };
        emit(Some(out), &text)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Suite)
    }
}

fn cmd_transcript(args: TranscriptArgs) -> Result<(), Failure> {
    let mut doc = ConfigDocument::load(&args.config).map_err(Failure::Config)?;
    if doc.trials != 1 {
        return Err(Failure::Usage(format!("transcript needs a scenario with trials = 1, found {}", doc.trials)));
    }
    if args.seed.is_some() {
        doc.seed = args.seed;
    }
    let seed = seed_or_draw(doc.seed);
    let scenario = doc.to_scenario(seed).map_err(Failure::Config)?;
    let run = run_trial(&scenario, 0)?;
    emit(Some(&args.out), &(run.transcript.to_json().map_err(runtime)? + "\n"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let failure = Failure::Usage(e.to_string().trim().to_string());
            eprintln!("{}", failure.report());
            return ExitCode::from(failure.exit_code());
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Transcript(a) => cmd_transcript(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.report());
            ExitCode::from(failure.exit_code())
        }
    }
}
