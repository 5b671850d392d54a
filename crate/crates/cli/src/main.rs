mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Model checking and equilibrium synthesis for parametric concurrent
/// stochastic games.
#[derive(Parser, Debug)]
#[command(name = "respgames", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a state formula at a state.
    Check(CheckArgs),
    /// Responsibility degree of an agent for a path formula under a plan.
    Degree(DegreeArgs),
    /// Nash equilibria of the utility game.
    Ne(NeArgs),
    /// Monte-Carlo estimate of a path probability or a degree.
    Simulate(SimulateArgs),
    /// Evaluate an expression or a path probability at a valuation.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Human,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    #[value(name = "CAR", alias = "car")]
    Car,
    #[value(name = "CPR", alias = "cpr")]
    Cpr,
}

#[derive(Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub model: PathBuf,
    /// Parameter binding `name=value`; values are exact (`3/10`, `0.3`).
    #[arg(long = "bind", value_name = "NAME=VALUE")]
    pub bind: Vec<String>,
    #[arg(long = "limit-terms")]
    pub limit_terms: Option<usize>,
    #[arg(long = "limit-paths")]
    pub limit_paths: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "human")]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct FormulaArgs {
    #[arg(long, conflicts_with = "formula_file")]
    pub formula: Option<String>,
    #[arg(long = "formula-file")]
    pub formula_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub formula: FormulaArgs,
    /// State to check at; defaults to the initial state.
    #[arg(long)]
    pub state: Option<String>,
}

#[derive(Args, Debug)]
pub struct DegreeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub formula: FormulaArgs,
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub agent: String,
    #[arg(long)]
    pub plan: String,
    /// Comma-separated coalition; defaults to every agent.
    #[arg(long)]
    pub coalition: Option<String>,
}

#[derive(Args, Debug)]
pub struct NeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long)]
    pub lambda1: Option<String>,
    #[arg(long)]
    pub lambda2: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    /// Plan responsibility is measured against; needs a formula.
    #[arg(long, requires = "formula")]
    pub plan: Option<String>,
    #[command(flatten)]
    pub formula: FormulaArgs,
    /// State the payoff histories start from; defaults to the initial state.
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub starts: usize,
    #[arg(long, env = "RESPGAMES_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also report the gap to a grid best response at step 1/N.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub formula: FormulaArgs,
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, env = "RESPGAMES_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Estimate a degree instead of a probability.
    #[arg(long, value_enum, requires_all = ["agent", "plan"])]
    pub kind: Option<Kind>,
    #[arg(long)]
    pub agent: Option<String>,
    #[arg(long)]
    pub plan: Option<String>,
    #[arg(long)]
    pub coalition: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Path formula whose probability is evaluated.
    #[command(flatten)]
    pub formula: FormulaArgs,
    /// Polynomial or rational function in the parameters.
    #[arg(long, conflicts_with_all = ["formula", "formula_file"])]
    pub expr: Option<String>,
    #[arg(long)]
    pub state: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let out = run::dispatch(&cli.command);
    let code = run::emit(&cli.command, out, started.elapsed());
    ExitCode::from(code)
}
