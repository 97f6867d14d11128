use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quadbench::config::{ModelKind, CONFIG_ENV};
use quadbench::par::Exec;
use quadbench::trajectory::TrajectoryKind;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "quadbench", version, about = "Nano-quadrotor identification benchmark")]
struct Cli {
    /// JSON run configuration; defaults apply to anything it omits.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured prediction horizon.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true, default_value = "parallel")]
    exec: Exec,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fly reference trajectories in closed loop and write flight logs.
    Simulate(SimulateArgs),
    /// Align, retime, crop, gap-fill and filter raw logs.
    Preprocess(PreprocessArgs),
    /// Fit rotor thrust and moment coefficients.
    Estimate(EstimateArgs),
    /// Build and train a predictor on the training trajectories.
    Train(TrainArgs),
    /// Multi-horizon open-loop evaluation on the test trajectories.
    Evaluate(EvaluateArgs),
    /// Compare evaluation results in a table.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Trajectory kind, or `all` for the four benchmark trajectories.
    #[arg(long, default_value = "all", value_parser = parse_traj)]
    pub traj: TrajSelection,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Length override for Random, Chirp and Hover [s].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Linear drag injected into the plant [1/s].
    #[arg(long)]
    pub drag: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub enum TrajSelection {
    All,
    One(TrajectoryKind),
}

fn parse_traj(s: &str) -> Result<TrajSelection, String> {
    if s == "all" {
        return Ok(TrajSelection::All);
    }
    s.parse().map(TrajSelection::One).map_err(|e: quadbench::trajectory::UnknownTrajectory| e.to_string())
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Raw CSV files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Skip the low-pass stage.
    #[arg(long)]
    pub no_filter: bool,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Flight logs or directories; files are selected by trajectory name.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated trajectory names replacing the configured training split.
    #[arg(long, value_delimiter = ',')]
    pub trajectories: Option<Vec<String>>,
    /// Writes the report as JSON.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelKind,
    /// Flight logs or directories; files are selected by trajectory name.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Comma-separated trajectory names replacing the configured training split.
    #[arg(long, value_delimiter = ',')]
    pub trajectories: Option<Vec<String>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long, conflicts_with = "model")]
    pub checkpoint: Option<PathBuf>,
    /// Untrained baseline (`naive` or `physics`) evaluated directly.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Comma-separated trajectory names replacing the configured test split.
    #[arg(long, value_delimiter = ',')]
    pub trajectories: Option<Vec<String>>,
    /// Weight every window equally instead of every run.
    #[arg(long)]
    pub pooled: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    /// Directory for report.md, curves.csv and summary.json.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
