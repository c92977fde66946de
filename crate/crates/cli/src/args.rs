use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "diffggm",
    version,
    about = "Test for differences between two Gaussian graphical models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a model pair and write both datasets plus the ground truth.
    Simulate(Flags),
    /// Run the nodewise tests on two delimited data files.
    Test(Flags),
    /// Monte-Carlo power, false positives and coverage on simulated data.
    Benchmark(Flags),
    /// Power as a function of the second sample size.
    PowerCurve(Flags),
    /// Permutation p-values next to the parametric ones.
    Permute(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Test(_) => "test",
            Command::Benchmark(_) => "benchmark",
            Command::PowerCurve(_) => "power-curve",
            Command::Permute(_) => "permute",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Simulate(f)
            | Command::Test(f)
            | Command::Benchmark(f)
            | Command::PowerCurve(f)
            | Command::Permute(f) => f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lasso,
    Fused,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CorrectionArg {
    None,
    Bh,
}

/// Every option is optional here; unset ones fall back to the defaults or to
/// the `--config` file, which wins over flags.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long)]
    pub input_a: Option<PathBuf>,
    #[arg(long)]
    pub input_b: Option<PathBuf>,
    /// Where results are written (created if missing).
    #[arg(long, default_value = "diffggm-out")]
    pub output_dir: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub correction: Option<CorrectionArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated second-group sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n2_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long)]
    pub diff_sparsity: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated penalty multipliers searched by cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub bounds_c: Option<f64>,
    #[arg(long)]
    pub bounds_a: Option<f64>,
    #[arg(long)]
    pub bounds_sd: Option<usize>,
    #[arg(long)]
    pub bounds_s12: Option<usize>,
    #[arg(long)]
    pub bounds_m: Option<f64>,
    /// Number of random re-splits for `permute`.
    #[arg(long)]
    pub permutations: Option<usize>,
}
