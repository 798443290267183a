//! `boundsum` command line: sums, sensitivity bounds, attack generation and
//! verification, distinguishing experiments, exact DP checks.
//!
//! Exit codes: 0 success, 2 bad input or violated precondition, 3 a check
//! that ran and failed.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boundsum", version, about = "Bounded sums over finite numeric types")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sum a dataset file with a summation method.
    Sum(SumArgs),
    /// Sensitivity bounds.
    #[command(subcommand)]
    Sens(SensCommand),
    /// Adversarial dataset pairs.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Distinguishing experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Exact DP checks.
    #[command(subcommand)]
    Dpcheck(DpcheckCommand),
}

#[derive(Subcommand)]
enum SensCommand {
    /// Closed-form bounds (idealized, implemented upper, modular, attack lower).
    Bound(SensBoundArgs),
    /// Exhaustive sensitivity over a small format.
    Bruteforce(SpecArgs),
    /// Methods with a sensitivity bound that holds for them.
    Recommend(RecommendArgs),
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Generate an instance: two dataset files, an instance file, a manifest.
    Gen(AttackGenArgs),
    /// Recompute an instance's gap and compare it with the prediction.
    Verify(AttackVerifyArgs),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Threshold noisy releases on u and v and bound the DP likelihood.
    Run(ExperimentArgs),
}

#[derive(Subcommand)]
enum DpcheckCommand {
    /// Compare exact output distributions of a discrete-noise mechanism.
    Exact(DpcheckArgs),
}

#[derive(Args)]
pub struct OutArgs {
    /// Directory for JSON artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SumArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `algorithm[/rounding][+transform...]`, e.g. `iterative`, `kahan/rtz`, `iterative+permute:0`.
    #[arg(long, default_value = "iterative")]
    pub method: String,
    /// Overrides the rounding mode in `--method`.
    #[arg(long)]
    pub rounding: Option<String>,
    /// Replaces the random permutation seed in `--method`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SpecArgs {
    /// Dataset file supplying the format and bounds (and `n` by default).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// `(k,l)-float`, `binary32`, `binary64`, `u8-wrap`, `i16-sat`, ...
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<String>,
    /// sym, co, ham or id.
    #[arg(long, default_value = "sym")]
    pub metric: String,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value = "iterative")]
    pub method: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SensBoundArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// all, idealized, implemented, modular or attack.
    #[arg(long, default_value = "all")]
    pub kind: String,
}

#[derive(Args)]
pub struct RecommendArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<String>,
    /// Public dataset length.
    #[arg(long)]
    pub n: Option<u64>,
    /// Truncation length when the length is private.
    #[arg(long)]
    pub n_max: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct AttackGenArgs {
    /// overflow, overflow_ham, saturation_reorder, float_reorder, rounding,
    /// repeated_rounding_1 or repeated_rounding_2.
    #[arg(long)]
    pub theorem: String,
    #[arg(long)]
    pub format: Option<String>,
    /// Float mantissa bits.
    #[arg(long)]
    pub k: Option<u32>,
    /// Float exponent bits.
    #[arg(long)]
    pub l: Option<u32>,
    /// Integer width.
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub signed: bool,
    /// wraparound or saturating.
    #[arg(long)]
    pub overflow: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<i128>,
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<i128>,
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<i64>,
    #[arg(long)]
    pub d: Option<i64>,
    #[arg(long)]
    pub drop_last: bool,
    /// Only report the closed-form prediction (repeated_rounding_2).
    #[arg(long)]
    pub predict: bool,
    /// Output directory (default: current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AttackVerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Method to run instead of the instance's target method.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct MechanismArgs {
    /// Privacy parameter, exact decimal or fraction.
    #[arg(long)]
    pub epsilon: String,
    /// laplace, discrete_laplace or discrete_laplace_mod.
    #[arg(long)]
    pub noise: Option<String>,
    /// Sensitivity the scale is calibrated to: idealized, implemented or modular.
    #[arg(long)]
    pub calibration: Option<String>,
    /// Explicit noise scale, overriding the calibrated one.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub mech: MechanismArgs,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Outcome 1 iff the release exceeds this (default: midpoint of the two sums).
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// violation or consistent; exit 3 when the verdict differs.
    #[arg(long)]
    pub expect: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct DpcheckArgs {
    #[arg(long, conflicts_with_all = ["u", "v"])]
    pub instance: Option<PathBuf>,
    #[arg(long, requires = "v")]
    pub u: Option<PathBuf>,
    #[arg(long, requires = "u")]
    pub v: Option<PathBuf>,
    /// Adjacency metric when u and v are given directly.
    #[arg(long, default_value = "sym")]
    pub metric: String,
    #[command(flatten)]
    pub mech: MechanismArgs,
    /// Output modulus; must equal 2^bits of the integer format.
    #[arg(long)]
    pub m: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sum(a) => commands::sum(&a),
        Command::Sens(SensCommand::Bound(a)) => commands::sens_bound(&a),
        Command::Sens(SensCommand::Bruteforce(a)) => commands::sens_bruteforce(&a),
        Command::Sens(SensCommand::Recommend(a)) => commands::sens_recommend(&a),
        Command::Attack(AttackCommand::Gen(a)) => commands::attack_gen(&a),
        Command::Attack(AttackCommand::Verify(a)) => commands::attack_verify(&a),
        Command::Experiment(ExperimentCommand::Run(a)) => commands::experiment_run(&a),
        Command::Dpcheck(DpcheckCommand::Exact(a)) => commands::dpcheck_exact(&a),
    };
    match result {
        Ok(commands::Outcome { passed: true }) => ExitCode::SUCCESS,
        Ok(commands::Outcome { passed: false }) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
