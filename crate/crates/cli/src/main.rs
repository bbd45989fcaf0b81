//! `mgcoop`: training, evaluation and one-shot solves for the networked
//! microgrid co-simulation.

mod error;
mod experiment;
mod oneshot;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mgcoop", version, about = "Cooperative retail pricing for networked microgrids")]
pub struct Cli {
    /// Experiment configuration (TOML); the bundled default scenario when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; replaces `seed` from the configuration.
    #[arg(long, global = true, value_name = "U64", value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Directory for output files [default: out; one-shot solves write nothing without it].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Configuration override such as `agent.phi=0.1`; repeatable. Values are parsed as TOML literals.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the pricing agent; writes episodes.csv, checkpoint.toml and manifest.toml.
    Train(TrainArgs),
    /// Score a trained agent's greedy prices on one or more windows; writes evaluation.csv.
    Evaluate(EvaluateArgs),
    /// Exhaustive price search on one window, compared with the agent; writes oracle.csv.
    Oracle(OracleArgs),
    /// Solve one AC power flow and print the bus table.
    Powerflow(PowerflowArgs),
    /// Solve one microgrid dispatch and print setpoints and the constraint audit.
    Dispatch(DispatchArgs),
    /// Derive rolling MAPE and shock-recovery figures from an episode log.
    ReportData(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Continue from a saved checkpoint instead of a fresh agent.
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Trained agent.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Number of consecutive windows to score.
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub windows: usize,
    /// First profile step [default: oracle.window_start].
    #[arg(long, value_name = "STEP")]
    pub start: Option<usize>,
    /// Episode whose scenario events apply [default: training.episodes, i.e. after training].
    #[arg(long, value_name = "N")]
    pub episode: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Trained agent to compare; trains one from the configuration when omitted.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// First profile step of the window [default: oracle.window_start].
    #[arg(long, value_name = "STEP")]
    pub start: Option<usize>,
    /// Episode whose scenario events apply [default: training.episodes].
    #[arg(long, value_name = "N")]
    pub episode: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PowerflowArgs {
    /// Network file [default: the bundled 33-bus feeder].
    #[arg(long, value_name = "PATH")]
    pub network: Option<PathBuf>,
    /// CSV of `bus,p_kw,q_kvar` injections (positive = generation); the network's
    /// nominal loads when omitted.
    #[arg(long, value_name = "PATH")]
    pub injections: Option<PathBuf>,
    /// Multiplier on the injections.
    #[arg(long, default_value_t = 1.0, value_name = "K")]
    pub scale: f64,
    /// Slack bus voltage (pu).
    #[arg(long, default_value_t = 1.0, value_name = "PU")]
    pub slack_voltage: f64,
    /// Newton iteration limit.
    #[arg(long, default_value_t = 30, value_name = "N")]
    pub max_iter: usize,
    /// Mismatch tolerance (pu).
    #[arg(long, default_value_t = 1e-8, value_name = "PU")]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct DispatchArgs {
    /// Microgrid asset file [default: the bundled 13-bus microgrid].
    #[arg(long, value_name = "PATH")]
    pub assets: Option<PathBuf>,
    /// Retail price per step ($/kWh), comma separated; sets the window length.
    #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
    pub prices: Vec<f64>,
    /// Aggregate demand per step (kW); a single value applies to every step.
    #[arg(long = "load-kw", value_name = "LIST", value_delimiter = ',', default_value = "0")]
    pub load_kw: Vec<f64>,
    /// Normalized irradiance per step; a single value applies to every step.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "0")]
    pub irradiance: Vec<f64>,
    /// PCC voltage per step (pu); a single value applies to every step.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "1")]
    pub v_pcc: Vec<f64>,
    /// Step length (h).
    #[arg(long, default_value_t = 1.0, value_name = "H")]
    pub dt_h: f64,
    /// Require storage to end the window at least as full as it started.
    #[arg(long)]
    pub terminal_soc: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Episode log [default: <out>/episodes.csv].
    #[arg(long, value_name = "PATH")]
    pub episodes: Option<PathBuf>,
    /// Episode of the parameter shock [default: first event in the log's manifest.toml].
    #[arg(long, value_name = "N")]
    pub shock_episode: Option<usize>,
    /// Width of the rolling MAPE.
    #[arg(long, default_value_t = 10, value_name = "N")]
    pub mape_window: usize,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => experiment::train(cli, a),
        Command::Evaluate(a) => experiment::evaluate(cli, a),
        Command::Oracle(a) => experiment::oracle(cli, a),
        Command::ReportData(a) => experiment::report_data(cli, a),
        Command::Powerflow(a) => oneshot::powerflow(cli, a),
        Command::Dispatch(a) => oneshot::dispatch(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation failures; --help and --version are not errors
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
