//! `gutbrain`: scenario simulation and analysis pipeline for the gut-brain
//! stress model.
//!
//! Exit codes: 0 on success, 1 when the pipeline itself fails (unstable
//! operating point, integration blow-up), 2 for usage problems (bad flags,
//! malformed config). Clap reports its own parse errors with exit code 2,
//! matching ours.

mod commands;
mod config;
mod output;
mod plot;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// A failed invocation, split by whose fault it was.
#[derive(Debug)]
pub enum Failure {
    /// The request never made sense: unparsable config, bad flag values.
    Usage(String),
    /// The request was well-formed but the pipeline could not complete it.
    Domain(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Failure::Domain(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gutbrain",
    version,
    about = "Closed-loop gut-brain stress model: simulation, bifurcation, \
             linearization, frequency response, and channel capacity"
)]
struct Cli {
    /// Configuration file; TOML by default, JSON for a .json extension.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config file and GBA_OUTPUT_DIR).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Worker threads for parallel sweeps; defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a stress scenario and write the trajectory, metrics, and plot.
    Simulate {
        /// healthy, acute, chronic, or custom (profile from the config).
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Sweep constant stress levels and locate the two regime thresholds.
    Bifurcate {
        /// Explicit k_leak grid; defaults to the config sweep range.
        #[arg(long, num_args = 1.., value_name = "KLEAK")]
        grid: Option<Vec<f64>>,
    },
    /// Find the equilibrium at one stress level and export the linearized
    /// system with its stability verdict.
    Linearize {
        /// Operating-point leak; defaults to analysis.kleak_healthy.
        #[arg(long)]
        kleak: Option<f64>,
    },
    /// Frequency response of the linearized channel at one operating point.
    Bode {
        /// Operating-point leak; defaults to analysis.kleak_healthy.
        #[arg(long)]
        kleak: Option<f64>,
        /// Frequency grid size; defaults to analysis.grid_points.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Shannon capacity across a range of constant stress levels.
    Capacity {
        /// Explicit k_leak values; defaults to analysis.capacity_grid.
        #[arg(long, num_args = 1.., value_name = "KLEAK")]
        kleak: Option<Vec<f64>>,
    },
    /// Water-filling detail plus noise and power sweeps at one operating
    /// point.
    CapacitySweep {
        /// Operating-point leak; defaults to analysis.kleak_healthy.
        #[arg(long)]
        kleak: Option<f64>,
    },
    /// Parse the config, validate every section, and echo the resolved form.
    ValidateConfig,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot size the worker pool: {e}")))?;
    }
    let cfg = config::load(cli.config.as_deref())?;

    match cli.command {
        Command::ValidateConfig => commands::validate_config(&cfg),
        Command::Simulate { scenario } => {
            let ws = commands::prepare(cfg, cli.output_dir)?;
            commands::simulate(&ws, scenario.as_deref())
        }
        Command::Bifurcate { grid } => {
            let ws = commands::prepare(cfg, cli.output_dir)?;
            commands::bifurcate(&ws, grid)
        }
        Command::Linearize { kleak } => {
            let ws = commands::prepare(cfg, cli.output_dir)?;
            commands::linearize(&ws, kleak)
        }
        Command::Bode { kleak, points } => {
            let ws = commands::prepare(cfg, cli.output_dir)?;
            commands::bode(&ws, kleak, points)
        }
        Command::Capacity { kleak } => {
            let ws = commands::prepare(cfg, cli.output_dir)?;
            commands::capacity(&ws, kleak)
        }
        Command::CapacitySweep { kleak } => {
            let ws = commands::prepare(cfg, cli.output_dir)?;
            commands::capacity_sweep(&ws, kleak)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
