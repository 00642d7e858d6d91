//! `satuav`: batch front end for training, simulation and sweeps.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid config, 3 runtime failure,
//! 4 constraint-audit failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "satuav", version, about = "Satellite-UAV data-collection mission toolkit")]
struct Cli {
    /// Run the built-in oracle comparisons, one JSON line per check.
    #[arg(long)]
    self_check: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario config (JSON). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if needed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlannerArgs {
    /// Q-network weights written by `train`.
    #[arg(long, conflicts_with = "oracle")]
    weights: Option<PathBuf>,
    /// Plan trajectories by value iteration instead of a trained network.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    upload_during_hover: Option<bool>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the trajectory planner; writes weights.json and training.csv.
    Train(Common),
    /// Fly one mission; writes mission.csv, sensing.csv and result.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Sense every this many slots on every leg, ignoring the stability
        /// bound.
        #[arg(long)]
        force_interval: Option<usize>,
    },
    /// One mission per value of a parameter; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        planner: PlannerArgs,
        /// lambda, data_size or p_max.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Repeat a run from its manifest.
    Rerun {
        manifest: PathBuf,
        /// Write here instead of the recorded directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective config with every default filled in.
    DumpConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.self_check {
        return commands::self_check();
    }
    let Some(command) = cli.command else {
        return Err(Failure::usage(anyhow::anyhow!(
            "no subcommand given; see `satuav --help`"
        )));
    };
    match command {
        Command::Train(c) => {
            let m = commands::fresh_manifest("train", &c.config, c.seed, &c.out)?;
            commands::execute(&m)
        }
        Command::Simulate {
            common,
            planner,
            force_interval,
        } => {
            let mut m = commands::fresh_manifest("simulate", &common.config, common.seed, &common.out)?;
            commands::attach_planner(&mut m, planner.weights.as_deref(), planner.oracle)?;
            m.upload_during_hover = planner.upload_during_hover;
            m.force_interval = force_interval;
            commands::execute(&m)
        }
        Command::Sweep {
            common,
            planner,
            axis,
            values,
        } => {
            let mut m = commands::fresh_manifest("sweep", &common.config, common.seed, &common.out)?;
            commands::attach_planner(&mut m, planner.weights.as_deref(), planner.oracle)?;
            m.upload_during_hover = planner.upload_during_hover;
            m.axis = Some(axis);
            m.values = Some(values);
            commands::execute(&m)
        }
        Command::Rerun { manifest, out } => commands::rerun(&manifest, out.as_deref()),
        Command::DumpConfig { config } => commands::dump_config(config.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
