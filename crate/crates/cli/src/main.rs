//! Command-line runner: schedule-based execution backtests against the
//! seeded simulator, the shortfall optimizer, and tape generation.
//!
//! Exit codes: 0 on success, 2 on configuration/validation errors, 1 on
//! runtime failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandsched::sim::SimConfig;
use config::{demo_run_config, load_json_config, paper_example_optimize, OptimizeConfig, RunConfig};

/// Configuration or validation problem (exit 2) vs runtime failure
/// (exit 1).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bandsched",
    version,
    about = "Band-scheduled execution strategies (VWAP, POV, IS) on a deterministic market simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration name (see each subcommand's help).
    #[arg(long)]
    preset: Option<String>,
    /// Override the simulator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Shortfall optimizer: durations, shape, participation, and costs.
    /// Preset: `paper-example`.
    OptimizeIs(CommonArgs),
    /// Backtest the banded VWAP strategy. Preset: `demo`.
    RunVwap(CommonArgs),
    /// Backtest the banded participation strategy. Preset: `demo`.
    RunPov(CommonArgs),
    /// Backtest the banded shortfall strategy. Preset: `demo`.
    RunIs(CommonArgs),
    /// Run the discretized (bin) scheduler. Preset: `demo`.
    RunDiscrete(CommonArgs),
    /// Generate a seeded market tape as CSV.
    GenMarket(CommonArgs),
}

fn load_run_config(args: &CommonArgs, strategy: &str) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = match (&args.config, &args.preset) {
        (Some(path), None) => load_json_config(path)?,
        (None, Some(name)) if name == "demo" => demo_run_config(strategy, args.seed.unwrap_or(42))
            .ok_or_else(|| CliError::validation(format!("no demo preset for `{strategy}`")))?,
        (None, Some(name)) => {
            return Err(CliError::validation(format!(
                "unknown preset `{name}` (available: demo)"
            )))
        }
        (Some(_), Some(_)) => {
            return Err(CliError::validation("give either --config or --preset, not both"))
        }
        (None, None) => {
            return Err(CliError::validation("--config or --preset is required"))
        }
    };
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::OptimizeIs(args) => {
            let cfg: OptimizeConfig = match (&args.config, &args.preset) {
                (Some(path), None) => load_json_config(path)?,
                (None, Some(name)) if name == "paper-example" => paper_example_optimize(),
                (None, Some(name)) => {
                    return Err(CliError::validation(format!(
                        "unknown preset `{name}` (available: paper-example)"
                    )))
                }
                (Some(_), Some(_)) => {
                    return Err(CliError::validation(
                        "give either --config or --preset, not both",
                    ))
                }
                (None, None) => {
                    return Err(CliError::validation("--config or --preset is required"))
                }
            };
            commands::cmd_optimize_is(&cfg, &args.out)
        }
        Command::RunVwap(args) => {
            let cfg = load_run_config(&args, "vwap")?;
            commands::cmd_run("vwap", &cfg, &args.out)
        }
        Command::RunPov(args) => {
            let cfg = load_run_config(&args, "pov")?;
            commands::cmd_run("pov", &cfg, &args.out)
        }
        Command::RunIs(args) => {
            let cfg = load_run_config(&args, "is")?;
            commands::cmd_run("is", &cfg, &args.out)
        }
        Command::RunDiscrete(args) => {
            let cfg = load_run_config(&args, "discrete")?;
            commands::cmd_run_discrete(&cfg, &args.out)
        }
        Command::GenMarket(args) => {
            let mut sim: SimConfig = match (&args.config, &args.preset) {
                (Some(path), None) => load_json_config(path)?,
                (None, None) | (None, Some(_)) => SimConfig::default(),
                (Some(_), Some(_)) => {
                    return Err(CliError::validation(
                        "give either --config or --preset, not both",
                    ))
                }
            };
            if let Some(seed) = args.seed {
                sim.seed = seed;
            }
            sim.validate()
                .map_err(|e| CliError::validation(e.to_string()))?;
            commands::cmd_gen_market(&sim, &args.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
