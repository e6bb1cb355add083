//! `sivplant` command-line pipeline.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, warn};
use sivplant::analysis::AnalysisError;
use sivplant::optics::OpticsError;
use sivplant::pinhole::{BeamConfig, PinholeError};
use sivplant::stats::StatsError;
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("missing input {path}: run `sivplant {producer}` first")]
    MissingInput { path: String, producer: String },
    #[error("physics warnings escalated by --strict: {}", .0.join("; "))]
    Physics(Vec<String>),
    #[error("analysis did not converge: {0}")]
    Analysis(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::MissingInput { .. } => 2,
            Failure::Physics(_) => 3,
            Failure::Analysis(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::YieldAboveOne(_) => Failure::Analysis(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<PinholeError> for Failure {
    fn from(e: PinholeError) -> Self {
        match e {
            PinholeError::UndefinedRatio => Failure::Analysis(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<OpticsError> for Failure {
    fn from(e: OpticsError) -> Self {
        match e {
            OpticsError::Config(_) | OpticsError::Undersampled { .. } => Failure::Usage(e.to_string()),
            OpticsError::Format(_) | OpticsError::Io(_) => Failure::Io(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::InvalidInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Analysis(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sivplant", version, about = "Pinhole implantation planning, transport, synthesis and analysis")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for inputs and outputs of the pipeline.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Treat physics warnings as errors (exit code 3).
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lay out an implantation session.
    Plan {
        /// Built-in session A, B, C or D.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Follow ions through the pinhole onto the sample planes.
    Transport {
        #[arg(long)]
        histories: Option<u64>,
        #[arg(long)]
        energy_mev: Option<f64>,
        #[arg(long)]
        wall_angle_deg: Option<f64>,
        /// Sample distances behind the foil; repeat for several planes.
        #[arg(long = "distance-mm")]
        distances_mm: Vec<f64>,
        /// Also sweep the wall angle at the configured energies.
        #[arg(long)]
        sweep: bool,
    },
    /// Realize emitters and record a confocal map (and optionally g2 data).
    Synth {
        /// Emitters behind the photon correlator.
        #[arg(long)]
        hbt_emitters: Option<usize>,
    },
    /// Detect spots, fit g2 and an optional ZPL spectrum.
    Analyze {
        /// Map to analyze instead of the synthesized one.
        #[arg(long)]
        map: Option<PathBuf>,
        /// `wavelength_nm,counts` CSV.
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Match detections to the plan and extract activation yields.
    Report,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    let stage = match cli.command {
        Command::Plan { preset } => {
            if preset.is_some() {
                config.preset = preset;
                config.session = None;
            }
            commands::plan(config, &cli.out)?
        }
        Command::Transport { histories, energy_mev, wall_angle_deg, distances_mm, sweep } => {
            let t = &mut config.transport;
            if let Some(n) = histories {
                t.histories = n;
            }
            if let Some(e) = energy_mev {
                let base = t.beam.clone();
                t.beam = Some(match base {
                    Some(b) => BeamConfig { energy_mev: e, ..b },
                    None => BeamConfig { energy_mev: e, divergence_mrad: 0.3, beam_radius_um: None, fluence_cm2: 0.0, ion: None },
                });
            }
            if let Some(a) = wall_angle_deg {
                t.pinhole.wall_angle_deg = a;
            }
            if !distances_mm.is_empty() {
                t.distances_mm = distances_mm;
            }
            commands::transport(config, &cli.out, sweep)?
        }
        Command::Synth { hbt_emitters } => {
            if let Some(n) = hbt_emitters {
                config.hbt.emitters = n;
            }
            commands::synth(config, &cli.out)?
        }
        Command::Analyze { map, spectrum } => commands::analyze(config, &cli.out, map.as_deref(), spectrum.as_deref())?,
        Command::Report => commands::report(config, &cli.out)?,
    };
    for path in &stage.written {
        println!("{}", path.display());
    }
    for w in &stage.warnings {
        warn!("{w}");
    }
    if !stage.unconverged.is_empty() {
        return Err(Failure::Analysis(stage.unconverged.join("; ")));
    }
    if cli.strict && !stage.warnings.is_empty() {
        return Err(Failure::Physics(stage.warnings));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
