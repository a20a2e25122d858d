//! `rulesift` command-line tool.
//!
//! Exit codes: 0 success, 1 empty hypothesis, 2 validation or config error,
//! 3 I/O error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overlay, CONFIG_ENV};
use rulesift::eval::{diff_hypotheses, evaluate, load_scenarios, write_scenarios, EvalError};
use rulesift::ingestion::synth::{generate_corpus, generate_scenarios, SynthConfig};
use rulesift::ingestion::{parse_records, read_corpus, write_corpus, Corpus, FixtureExtractor, IngestError, RecordKind};
use rulesift::learner::{ExternalSolver, ReferenceLearner, SolveError, Solver};
use rulesift::logic::{parse_bias, parse_program, print_program, BiasSpec, Program, RUNWAY_BIAS, RUNWAY_RULES};
use rulesift::pipeline::{pair_sources, run_check, run_pipeline, PipelineConfig, PipelineError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } | IngestError::MissingFixture(_) => CliError::Io(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(m) => CliError::Config(m),
            PipelineError::Ingest(i) => i.into(),
            PipelineError::Solve(SolveError::Io(io)) => CliError::Io(io.to_string()),
            PipelineError::Solve(s) => CliError::Invalid(s.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Ingest(i) => i.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rulesift", version, about = "Learn safety rules from noisy extracted facts")]
struct Cli {
    /// Config file of `key = value` lines
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Maximum worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus planted from a rule file
    Gen(GenArgs),
    /// Run validation and per-subset consistency checks only
    Check(RunArgs),
    /// Run the full pipeline and write the learned rules
    Learn(LearnArgs),
    /// Evaluate a rule file on scenarios
    Eval(EvalArgs),
    /// Compare two rule files on scenarios
    Diff(DiffArgs),
    /// Print a rule file in canonical form
    PrintRules(PrintArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Rules to plant (default: the built-in runway rules)
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Vocabulary (default: the built-in runway bias)
    #[arg(long)]
    bias: Option<PathBuf>,
    /// Number of subsets
    #[arg(long, default_value_t = 30)]
    subsets: usize,
    /// Fraction of corrupted subsets
    #[arg(long, default_value_t = 0.0)]
    corruption: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output corpus directory
    #[arg(long)]
    out: PathBuf,
    /// Also write this many held-out scenarios
    #[arg(long, default_value_t = 0)]
    held_out: usize,
    /// Where held-out scenarios go (default: <out>-held-out)
    #[arg(long)]
    held_out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct InputArgs {
    /// Corpus directory (`<id>/{bk.bk,exs.exs,meta}`, optional `bias.bias`)
    #[arg(long, conflicts_with = "records")]
    corpus: Option<PathBuf>,
    /// Records listing (`<id> <violation|nominal> <timestamp>` per line)
    #[arg(long, requires = "fixtures")]
    records: Option<PathBuf>,
    /// Fixture tree for the records (`<id>/attempt-<n>/`)
    #[arg(long, requires = "records")]
    fixtures: Option<PathBuf>,
    /// Bias file (default: `<corpus>/bias.bias`)
    #[arg(long)]
    bias: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct PipelineArgs {
    /// Failure threshold for the shuffle fallback
    #[arg(long)]
    rho: Option<f64>,
    /// Support pruning threshold
    #[arg(long)]
    tau: Option<f64>,
    /// Aggregation trials
    #[arg(long)]
    retries: Option<u32>,
    /// Extraction attempts per bundle
    #[arg(long)]
    validation_attempts: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Solver timeout in seconds
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    max_vars: Option<usize>,
    #[arg(long)]
    max_body: Option<usize>,
    #[arg(long)]
    max_clauses: Option<usize>,
    /// External solver program (default: built-in learner)
    #[arg(long)]
    solver_cmd: Option<PathBuf>,
}

impl PipelineArgs {
    fn overlay(&self, jobs: Option<usize>) -> Overlay {
        Overlay {
            rho: self.rho,
            tau: self.tau,
            retries: self.retries,
            validation_attempts: self.validation_attempts,
            seed: self.seed,
            timeout: self.timeout,
            max_vars: self.max_vars,
            max_body: self.max_body,
            max_clauses: self.max_clauses,
            jobs,
            solver_cmd: self.solver_cmd.clone(),
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Directory for the structured report
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output directory for report.jsonl, report.txt and final.rules
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    scenarios: PathBuf,
    /// Structured report file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiffArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrintArgs {
    file: PathBuf,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn rules_file(path: &Path) -> Result<Program, CliError> {
    parse_program(&read(path)?).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn bias_text(text: &str, origin: &str) -> Result<BiasSpec, CliError> {
    parse_bias(text).map_err(|e| CliError::Invalid(format!("{origin}: {e}")))
}

struct Settings {
    config: PipelineConfig,
    solver: Box<dyn Solver>,
}

fn settings(cli_config: Option<&Path>, jobs: Option<usize>, flags: &PipelineArgs) -> Result<Settings, CliError> {
    let overlay = Overlay::load(cli_config)?.then(flags.overlay(jobs));
    let config = overlay.pipeline()?;
    if let Some(n) = overlay.jobs {
        // A no-op when `--jobs` already sized the pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let solver: Box<dyn Solver> = match overlay.solver_cmd {
        Some(cmd) => Box::new(ExternalSolver::new(cmd)),
        None => Box::new(ReferenceLearner::new()),
    };
    Ok(Settings { config, solver })
}

enum Input {
    Corpus(Corpus, BiasSpec),
    Records(Vec<rulesift::ingestion::SourceRecord>, FixtureExtractor, BiasSpec),
}

fn load_input(args: &InputArgs) -> Result<Input, CliError> {
    let explicit_bias = match &args.bias {
        Some(p) => Some(bias_text(&read(p)?, &p.display().to_string())?),
        None => None,
    };
    if let Some(dir) = &args.corpus {
        let corpus = read_corpus(dir)?;
        let bias = match (explicit_bias, &corpus.bias) {
            (Some(b), _) => b,
            (None, Some(text)) => bias_text(text, "bias.bias")?,
            (None, None) => return Err(CliError::Config(format!("no --bias given and {} has no bias.bias", dir.display()))),
        };
        return Ok(Input::Corpus(corpus, bias));
    }
    match (&args.records, &args.fixtures, explicit_bias) {
        (Some(r), Some(f), Some(bias)) => {
            let records = parse_records(&read(r)?)?;
            Ok(Input::Records(records, FixtureExtractor::new(f), bias))
        }
        (Some(_), Some(_), None) => Err(CliError::Config("--records needs --bias".into())),
        _ => Err(CliError::Config("give --corpus or --records with --fixtures".into())),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<u8, CliError> {
    let rules = match &a.rules {
        Some(p) => rules_file(p)?,
        None => parse_program(RUNWAY_RULES).expect("built-in rules parse"),
    };
    let bias = match &a.bias {
        Some(p) => bias_text(&read(p)?, &p.display().to_string())?,
        None => parse_bias(RUNWAY_BIAS).expect("built-in bias parses"),
    };
    let cfg = SynthConfig {
        subsets: a.subsets,
        corruption: a.corruption,
        seed: a.seed,
        ..Default::default()
    };
    let corpus = generate_corpus(&rules, &bias, &cfg).map_err(|e| CliError::Invalid(e.to_string()))?;
    write_corpus(&a.out, &corpus.to_corpus())?;
    write(&a.out.join("manifest.json"), &corpus.manifest())?;
    println!(
        "wrote {} subsets ({} corrupted) to {}",
        corpus.subsets.len(),
        corpus.corrupted().count(),
        a.out.display()
    );
    if a.held_out > 0 {
        let dir = a.held_out_dir.clone().unwrap_or_else(|| {
            let mut name = a.out.as_os_str().to_owned();
            name.push("-held-out");
            PathBuf::from(name)
        });
        let scenarios = generate_scenarios(&rules, &bias, a.held_out, a.seed).map_err(|e| CliError::Invalid(e.to_string()))?;
        write_scenarios(&dir, &scenarios, cfg.start)?;
        println!("wrote {} held-out scenarios to {}", scenarios.len(), dir.display());
    }
    Ok(0)
}

fn split_records(records: Vec<rulesift::ingestion::SourceRecord>) -> (Vec<rulesift::ingestion::SourceRecord>, Vec<rulesift::ingestion::SourceRecord>) {
    records.into_iter().partition(|r| r.kind == RecordKind::Violation)
}

fn cmd_check(cli: &Cli, a: &RunArgs) -> Result<u8, CliError> {
    let s = settings(cli.config.as_deref(), cli.jobs, &a.pipeline)?;
    let report = match load_input(&a.input)? {
        Input::Corpus(c, bias) => run_check(&c.entries, &bias, &s.config, s.solver.as_ref())?,
        Input::Records(records, extractor, bias) => {
            let (v, n) = split_records(records);
            let sources = pair_sources(&extractor, &v, &n, s.config.seed)?;
            run_check(&sources, &bias, &s.config, s.solver.as_ref())?
        }
    };
    print!("{}", report.to_text());
    if let Some(out) = &a.out {
        write(&out.join("check.jsonl"), &report.to_jsonl())?;
    }
    Ok(0)
}

fn cmd_learn(cli: &Cli, a: &LearnArgs) -> Result<u8, CliError> {
    let s = settings(cli.config.as_deref(), cli.jobs, &a.pipeline)?;
    let report = match load_input(&a.input)? {
        Input::Corpus(c, bias) => run_pipeline(&c.entries, &bias, &s.config, s.solver.as_ref())?,
        Input::Records(records, extractor, bias) => {
            let (v, n) = split_records(records);
            let sources = pair_sources(&extractor, &v, &n, s.config.seed)?;
            run_pipeline(&sources, &bias, &s.config, s.solver.as_ref())?
        }
    };
    let text = report.to_text();
    write(&a.out.join("report.jsonl"), &report.to_jsonl())?;
    write(&a.out.join("report.txt"), &text)?;
    write(&a.out.join("final.rules"), &report.final_rules())?;
    print!("{text}");
    Ok(if report.final_hypothesis.is_empty() { 1 } else { 0 })
}

fn cmd_eval(a: &EvalArgs) -> Result<u8, CliError> {
    let h = rules_file(&a.rules)?;
    let scenarios = load_scenarios(&a.scenarios)?;
    let report = evaluate(&h, &scenarios);
    print!("{}", report.to_table());
    if let Some(out) = &a.out {
        write(out, &(report.to_json() + "\n"))?;
    }
    Ok(0)
}

fn cmd_diff(a: &DiffArgs) -> Result<u8, CliError> {
    let left = rules_file(&a.left)?;
    let right = rules_file(&a.right)?;
    let scenarios = load_scenarios(&a.scenarios)?;
    let d = diff_hypotheses(&left, &right, &scenarios);
    for x in &d.disagreements {
        println!("{} {} ({:?}): left={} right={}", x.scenario, x.atom, x.label, x.left, x.right);
    }
    let m = &d.delta;
    println!(
        "delta tp {:+} fp {:+} fn {:+} tn {:+}  accuracy {:+.3} precision {:+.3} recall {:+.3} f1 {:+.3}",
        m.tp, m.fp, m.fn_, m.tn, m.accuracy, m.precision, m.recall, m.f1
    );
    if let Some(out) = &a.out {
        write(out, &(d.to_json() + "\n"))?;
    }
    Ok(0)
}

fn cmd_print(a: &PrintArgs) -> Result<u8, CliError> {
    print!("{}", print_program(&rules_file(&a.file)?));
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    if cli.jobs == Some(0) {
        return Err(CliError::Config("jobs must be positive".into()));
    }
    if let Some(n) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Check(a) => cmd_check(cli, a),
        Command::Learn(a) => cmd_learn(cli, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Diff(a) => cmd_diff(a),
        Command::PrintRules(a) => cmd_print(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rulesift: {e}");
            ExitCode::from(e.code())
        }
    }
}
