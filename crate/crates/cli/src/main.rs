//! `beamqopt` — one binary driving the whole pipeline:
//! generate a scenario, build its QUBO, solve it classically or with the
//! statevector QAOA engine, and verify a build by brute force.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 capacity error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "beamqopt",
    version,
    about = "Multi-beam slot assignment via QUBO and QAOA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic traffic scenario and write it as JSON.
    Generate(GenerateArgs),
    /// Compile a scenario into a QUBO file plus its index sidecar.
    Build(BuildArgs),
    /// Solve a scenario with a classical or quantum solver.
    Solve(SolveArgs),
    /// Brute-force check that every QUBO minimizer is a feasible optimum.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Uniform,
    Hotspot,
    Mixed,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    profile: ProfileArg,
    #[arg(long)]
    flows: usize,
    #[arg(long)]
    units: usize,
    #[arg(long, default_value_t = 2)]
    beams: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Queue backlog range in whole transmissions, inclusive.
    #[arg(long, default_value_t = 1)]
    volume_min: u32,
    #[arg(long, default_value_t = 4)]
    volume_max: u32,
    /// Base rate range in multiples of dq, inclusive.
    #[arg(long, default_value_t = 1)]
    rate_min: u32,
    #[arg(long, default_value_t = 4)]
    rate_max: u32,
    /// Comma-separated priority levels.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0])]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    hot_fraction: f64,
    /// Couple weights to drawn volumes instead of drawing independently.
    #[arg(long)]
    correlated_weights: bool,
    #[arg(long, default_value_t = 1.0)]
    dq: f64,
    #[arg(long, default_value_t = 1.0)]
    dp: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct BuildArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Divide rates, capacities, powers, and limits by this factor first.
    #[arg(long)]
    rescale: Option<f64>,
    /// Override the scenario's queue slack quantum.
    #[arg(long)]
    dq: Option<f64>,
    /// Override the scenario's power slack quantum.
    #[arg(long)]
    dp: Option<f64>,
    /// Penalty weights; give all three or none (auto-calibrated).
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Exact,
    Greedy,
    Qaoa,
    Layerwise,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MixerArg {
    /// Transverse-field X mixer on the uniform superposition.
    X,
    /// Rotated-Ry mixer around a classical product state.
    Ry,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PhisArg {
    /// Angles from the greedy solution's bits (0 or pi per bit).
    Greedy,
    /// pi/2 everywhere (uniform superposition).
    Plus,
    /// 0 everywhere (the all-zeros state).
    Zeros,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// QUBO file (required for the quantum solvers).
    #[arg(long)]
    qubo: Option<PathBuf>,
    #[arg(long, value_enum)]
    solver: SolverArg,
    /// Circuit depth (qaoa) or maximum depth (layerwise).
    #[arg(long)]
    layers: Option<usize>,
    /// Hill-climbing iterations (per layer for layerwise).
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 4096)]
    shots: u64,
    /// Evaluate energies from the exact statevector instead of sampling.
    #[arg(long)]
    exact_expectation: bool,
    #[arg(long, value_enum, default_value_t = MixerArg::X)]
    mixer: MixerArg,
    #[arg(long, value_enum, default_value_t = PhisArg::Greedy)]
    phis: PhisArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50_000_000)]
    node_limit: u64,
    /// Run this many independent seeds (seed, seed+1, ...), one output set each.
    #[arg(long, default_value_t = 1)]
    repeats: u64,
    /// Hamming profile over the full bitstring instead of decision bits.
    #[arg(long)]
    profile_full_bits: bool,
    /// Skip the repair step when computing profile throughput gaps.
    #[arg(long)]
    profile_no_repair: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    qubo: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Build(args) => commands::build(&args),
        Command::Solve(args) => commands::solve(&args),
        Command::Verify(args) => commands::verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
