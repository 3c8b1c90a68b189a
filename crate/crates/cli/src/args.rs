use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rkhs_complexity::casestudy::{
    DEFAULT_GROWTH_LAMBDA, DEFAULT_POOL_SIZE, DEFAULT_SCALING_C, DEFAULT_SCALING_K_MAX, DEFAULT_SCALING_LAMBDAS,
    DEFAULT_T_GRID,
};
use rkhs_complexity::eluder::DEFAULT_BRUTE_FORCE_BUDGET;
use rkhs_complexity::infogain::DEFAULT_EXHAUSTIVE_BUDGET;
use rkhs_complexity::kernel::DEFAULT_NUM_TERMS;
use rkhs_complexity::sandwich::DEFAULT_K_MAX;

#[derive(Parser, Debug)]
#[command(
    name = "rkhs-complexity",
    version,
    about = "Information gain, critical information gain and eluder dimension of RKHS balls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Information gain of a point sequence
    Gain(GainArgs),
    /// Maximum information gain over T-tuples
    Maxgain(MaxGainArgs),
    /// Critical information gain
    Critical(CriticalArgs),
    /// Eluder dimension of the ball B(S)
    Eluder(EluderArgs),
    /// Check both bounds relating eluder dimension and critical gain
    Sandwich(SandwichArgs),
    /// Eigendecay growth and scaling experiments
    Casestudy(CaseStudyArgs),
    /// Compare the two regret exponents
    Exponents(ExponentsArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct DataArgs {
    /// Points CSV (one point per row, optional header, `#` comments)
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Kernel JSON, e.g. {"type": "rbf", "gamma": 0.5}
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Precomputed Gram CSV; points are then row indices
    #[arg(long, conflicts_with_all = ["points", "kernel"])]
    pub gram: Option<PathBuf>,
    /// Declared bound on ||x|| checked against every point
    #[arg(long)]
    pub bound: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct OutputArgs {
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GainMethodArg {
    Greedy,
    Exhaustive,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EluderMethodArg {
    LowerBound,
    BruteForce,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DimensionArg {
    Auto,
    BruteForce,
    LowerBound,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CriticalArg {
    Auto,
    Greedy,
    Exhaustive,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudyMode {
    Growth,
    Scaling,
}

#[derive(Args, Debug, Serialize)]
pub struct GainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Comma-separated point indices (default: every point in order)
    #[arg(long, value_delimiter = ',')]
    pub sequence: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct MaxGainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long = "t")]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = GainMethodArg::Greedy)]
    pub method: GainMethodArg,
    /// Node budget of the exhaustive search
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_BUDGET)]
    pub budget: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CriticalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = GainMethodArg::Greedy)]
    pub method: GainMethodArg,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_BUDGET)]
    pub budget: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct EluderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long = "s")]
    pub s: f64,
    /// Comma-separated eps' values, each >= epsilon (default: 1, 2, 4, 8 times epsilon)
    #[arg(long, value_delimiter = ',')]
    pub eps_prime_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = EluderMethodArg::LowerBound)]
    pub method: EluderMethodArg,
    /// Oracle-call budget of the brute-force search
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_BUDGET)]
    pub budget: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SandwichArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Comma-separated epsilon grid
    #[arg(long, value_delimiter = ',', required = true)]
    pub epsilon: Vec<f64>,
    #[arg(long = "s")]
    pub s: f64,
    /// Bound B on ||x|| (default: largest point norm)
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Comma-separated c grid for the lower bound (default: midpoint per epsilon)
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = DimensionArg::Auto)]
    pub dimension: DimensionArg,
    #[arg(long, value_enum, default_value_t = CriticalArg::Auto)]
    pub critical: CriticalArg,
    /// Require exact computation of both sides
    #[arg(long)]
    pub exact: bool,
    /// Comma-separated eps' multipliers, each >= 1
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
    pub eps_prime_multipliers: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_BUDGET)]
    pub exhaustive_budget: u64,
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_BUDGET)]
    pub brute_force_budget: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CaseStudyArgs {
    #[arg(long, value_enum)]
    pub mode: CaseStudyMode,
    #[arg(long)]
    pub beta: f64,
    #[arg(long = "d", default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = DEFAULT_NUM_TERMS)]
    pub num_terms: usize,
    /// Regularizer of the growth experiment
    #[arg(long, default_value_t = DEFAULT_GROWTH_LAMBDA)]
    pub lambda: f64,
    /// Comma-separated increasing T grid of the growth experiment
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_T_GRID)]
    pub t_grid: Vec<usize>,
    /// Comma-separated decreasing lambda grid of the scaling experiment
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SCALING_LAMBDAS)]
    pub lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SCALING_C)]
    pub c: f64,
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SCALING_K_MAX)]
    pub k_max: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct ExponentsArgs {
    #[arg(long = "d")]
    pub d: usize,
    #[arg(long)]
    pub beta: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

impl Command {
    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Gain(a) => &a.output,
            Command::Maxgain(a) => &a.output,
            Command::Critical(a) => &a.output,
            Command::Eluder(a) => &a.output,
            Command::Sandwich(a) => &a.output,
            Command::Casestudy(a) => &a.output,
            Command::Exponents(a) => &a.output,
        }
    }
}
