use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sensor network localization by block coordinate descent.
#[derive(Debug, Parser)]
#[command(name = "snl", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance and write it as JSON.
    Generate(GenerateArgs),
    /// Solve an instance and write the solution with its per-sweep trace.
    Solve(SolveArgs),
    /// Run repeated randomized solves for every row of a grid file.
    Bench(BenchArgs),
    /// Score a solution against the ground truth stored in its instance.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of sensors.
    #[arg(long)]
    pub m: usize,
    /// Number of anchors.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Radio range: a number, `sqrt(c/m)` or `cbrt(c/m)`.
    #[arg(long)]
    pub rho: String,
    /// Multiplicative noise level.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; defaults to a generated name under $SNL_OUT_DIR (or the
    /// current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GammaModeArg {
    Fixed,
    Scheduled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Each sensor starts on its nearest measured anchor.
    NearestAnchor,
    /// Uniform in the interior of the anchors' convex hull (2-D only).
    Interior,
    /// Estimates read from an existing solution file (see --init-path).
    File,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Stopping tolerance on the relative change and factor gap.
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = GammaModeArg::Scheduled)]
    pub gamma_mode: GammaModeArg,
    /// Penalty for fixed mode: a number, or `auto` for the convergence
    /// threshold at the initial point.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Multiplier on the threshold when `--gamma auto`.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_factor: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_sweeps: usize,
    /// Scheduled mode: initial γ as a fraction of the threshold.
    #[arg(long, default_value_t = 5e-3)]
    pub warm_factor: f64,
    /// Scheduled mode: relative change of f that ends the exploratory phase.
    #[arg(long, default_value_t = 1e-2)]
    pub plateau_tol: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Output path; defaults to `<instance stem>.solution.json` under
    /// $SNL_OUT_DIR, or next to the instance.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InitArg::NearestAnchor)]
    pub init: InitArg,
    /// Solution file supplying the start for `--init file`.
    #[arg(long)]
    pub init_path: Option<PathBuf>,
    /// Seed for `--init interior`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// CSV grid with header m,n,dim,rho,sigma,seed.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
}
