//! `dptool`: validate, analyze, audit, simulate and score decision-problem
//! experiments from JSON problem files and CSV trial data.

mod commands;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dptool_core::RuleChoice;

use crate::io::EXIT_USAGE;

#[derive(Parser)]
#[command(
    name = "dptool",
    version,
    about = "Audit, benchmark and simulate decision-problem experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum RuleArg {
    Incentive,
    #[default]
    Evaluation,
}

impl From<RuleArg> for RuleChoice {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Incentive => RuleChoice::Incentive,
            RuleArg::Evaluation => RuleChoice::Evaluation,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, PartialEq, Eq)]
pub enum RowFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem file; exit 1 if it violates any constraint.
    Validate { problem: PathBuf },
    /// Rational benchmark, baseline, value of information and decision thresholds.
    Analyze(AnalyzeArgs),
    /// Well-definedness verdict, loss ledger, multiplicity and disclosure screens.
    Audit(AuditArgs),
    /// Simulate an agent: sampled trial CSV or exact metrics.
    Simulate(SimulateArgs),
    /// Score trial data: B, C and the normalized loss decomposition.
    Score(ScoreArgs),
    /// Evaluate a grid of agents on one problem.
    Sweep(SweepArgs),
    /// Learning curve of an agent that learns the joint from feedback.
    Learn(LearnArgs),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    pub problem: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Belief-grid resolution (points per unit) for threshold and properness checks.
    #[arg(long)]
    pub grid: Option<u32>,
    #[arg(long, value_enum, default_value_t)]
    pub rule: RuleArg,
}

#[derive(Args)]
pub struct AuditArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    pub problem: PathBuf,
    /// Agent specification (JSON); a rational agent when omitted.
    #[arg(long)]
    pub agent: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit closed-form metrics instead of sampled trials.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, value_enum, default_value_t)]
    pub rule: RuleArg,
}

#[derive(Args)]
pub struct ScoreArgs {
    pub problem: PathBuf,
    pub data: PathBuf,
    /// Report the Δ-normalized loss ratios; exit 3 when Δ is zero.
    #[arg(long)]
    pub decompose: bool,
    /// Decompose each condition separately.
    #[arg(long)]
    pub by_condition: bool,
    /// Bind a condition to its own problem file: NAME=PATH. Repeatable.
    #[arg(long = "condition-problem", value_name = "NAME=PATH")]
    pub condition_problems: Vec<String>,
    /// Bootstrap resamples for percentile intervals.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub coverage: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add-α smoothing of the empirical conditionals used for C.
    #[arg(long)]
    pub laplace: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub rule: RuleArg,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    pub problem: PathBuf,
    /// Agent grid (JSON): a list of agents or a product specification.
    #[arg(long)]
    pub agents: PathBuf,
    /// Sample this many trials per agent instead of exact evaluation.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub rule: RuleArg,
    #[arg(long, value_enum, default_value_t)]
    pub format: RowFormat,
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LearnArgs {
    pub problem: PathBuf,
    /// Response parameters (softmax temperature, lapse rate) of the learner.
    #[arg(long)]
    pub agent: Option<PathBuf>,
    /// Initial pseudo-count in every signal-state cell.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = match cli.command {
        Command::Validate { problem } => commands::validate(&problem),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Audit(args) => commands::audit(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Score(args) => commands::score(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Learn(args) => commands::learn(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
