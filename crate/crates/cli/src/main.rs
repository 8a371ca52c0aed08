use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod manifest;
mod plot;

use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "ltcache", version, about = "LT-coded edge caching: failure curves, backhaul rates, placement and simulation")]
struct Cli {
    /// Scenario JSON, or a manifest.json from an earlier run to repeat it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write a gnuplot script next to plottable data.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Failure probability P_F(δ) versus overhead.
    Pfail,
    /// Average overhead E[Δ].
    Overhead,
    /// Connectivity distribution from the grid geometry.
    Connectivity(GeometryArgs),
    /// Optimized cache placement (integer and relaxed).
    Optimize(PointArgs),
    /// Normalized backhaul rate versus cache size, LT and MDS.
    RateVsM,
    /// Normalized backhaul rate versus Zipf exponent, LT and MDS.
    RateVsAlpha(PointArgs),
    /// Monte Carlo delivery simulation at the optimized placement.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct GeometryArgs {
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PointArgs {
    /// Cache size in files; overrides `M`.
    #[arg(long = "M")]
    pub cache_files: Option<usize>,
    /// Zipf exponent; overrides `alpha`.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Write one CSV row per request.
    #[arg(long)]
    pub per_trial: bool,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let ctx = commands::Context {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        plot: cli.plot,
    };
    match cli.command {
        Command::Pfail => commands::pfail(&ctx),
        Command::Overhead => commands::overhead(&ctx),
        Command::Connectivity(g) => commands::connectivity(&ctx, &g),
        Command::Optimize(p) => commands::optimize(&ctx, &p),
        Command::RateVsM => commands::rate_vs_m(&ctx),
        Command::RateVsAlpha(p) => commands::rate_vs_alpha(&ctx, &p),
        Command::Simulate(s) => commands::simulate(&ctx, &s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
