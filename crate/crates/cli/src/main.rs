//! `slm`: data generation, training, evaluation, property checks and
//! benchmark runs for shuffled linear models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "slm", version, about = "Shuffled linear models: fit, evaluate and benchmark")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalOpts {
    /// Seed for every random draw; overrides the config's seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config file; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file, or output directory for `bench`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Small preset: 3 repetitions, 200-step trajectories.
    #[arg(long, global = true)]
    pub quick: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate Van der Pol phase data as CSV.
    GenData,
    /// Fit a model on the learning phase.
    Train(TrainArgs),
    /// Evaluate a saved model on phase data.
    Eval(EvalArgs),
    /// Run Monte-Carlo property suites.
    Check(CheckArgs),
    /// Run the repeated SLM/ELM comparison.
    Bench,
    /// Export centers, widths and rollouts for plotting.
    PlotData(PlotArgs),
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigAction {
    /// Print the full default configuration as TOML.
    PrintDefaults,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindArg {
    Slm,
    Elm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseArg {
    Learning,
    Generalisation,
    Simulation,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Onestep,
    Rollout,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Phase-data CSV; generated from the config when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "slm")]
    pub kind: KindArg,
    /// Number of local models / hidden nodes; defaults to h_slm or h_elm.
    #[arg(long)]
    pub h: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Phase-data CSV; generated from the config when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "onestep")]
    pub mode: EvalMode,
    /// Phase to evaluate; defaults to generalisation (onestep) or simulation (rollout).
    #[arg(long, value_enum)]
    pub phase: Option<PhaseArg>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// rank, interpolation, equivalence, elm-reduction, distinct-norms or all.
    pub suite: String,
    /// Number of seeded instances.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Sample counts N (comma separated).
    #[arg(long = "N", value_delimiter = ',')]
    pub samples: Option<Vec<usize>>,
    /// Input dimensions n (comma separated).
    #[arg(long = "n", value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Print every case, not only failures.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Phase-data CSV for the rollouts; generated from the config when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), commands::CliError> {
    let g = &cli.global;
    match cli.command {
        Command::GenData => commands::gen_data(g),
        Command::Train(a) => commands::train(g, &a),
        Command::Eval(a) => commands::eval(g, &a),
        Command::Check(a) => commands::check(g, &a),
        Command::Bench => commands::bench(g),
        Command::PlotData(a) => commands::plot_data(g, &a),
        Command::Config {
            action: ConfigAction::PrintDefaults,
        } => commands::print_defaults(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
