//! Batch front end: fits S21 traces and sweep datasets, runs the film
//! calculators and generates synthetic fixtures. Writes JSON reports, CSV
//! tables and SVG plots.

pub mod config;
pub mod films;
pub mod io;
pub mod report;
pub mod schemas;
pub mod sweeps;
pub mod synth;
pub mod traces;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::{Flags, Pipeline, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("writing {0}: {1}")]
    Io(String, std::io::Error),
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    TotalFailure = 1,
    PartialFailure = 2,
    ConfigError = 3,
}

const UNITS: &str = "\
Units at the boundary: frequency Hz, temperature K, power dBm, attenuation dB, \
thickness nm, resistivity µΩ·cm, time s.

Exit codes: 0 success, 1 every input failed, 2 some inputs failed, 3 configuration error.

Set RESQ_LOG (error, warn, info, debug) for log output on stderr.";

#[derive(Debug, Parser)]
#[command(name = "resq", version, about = "Superconducting resonator and film analysis", after_help = UNITS)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for multi-start fits and synthetic noise.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Line attenuation from the power reference plane to the chip, dB.
    #[arg(
        long = "attenuation-db",
        global = true,
        value_name = "DB",
        allow_negative_numbers = true
    )]
    attenuation_db: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Circle-fit S21 traces (CSV `freq_hz,re,im` or `freq_hz,mag_db,phase_rad`,
    /// optional `<stem>.json` sidecar with power_dbm, temperature_k,
    /// attenuation_db, resonator_id, time_s).
    FitTraces {
        /// Trace files, directories or glob patterns.
        inputs: Vec<String>,
    },
    /// Fit the power-law TLS model to Q_i versus photon number.
    FitPower {
        /// Dataset JSON files, directories or glob patterns.
        inputs: Vec<String>,
    },
    /// Fit the joint TLS, quasiparticle and residual loss model over power and temperature.
    FitTemp {
        /// Dataset JSON files, directories or glob patterns.
        inputs: Vec<String>,
    },
    /// Fit the TLS and quasiparticle frequency-shift model versus temperature.
    FitShift {
        /// Dataset JSON files, directories or glob patterns.
        inputs: Vec<String>,
    },
    /// Film calculators: resistivity versus thickness, Tc and RRR from R(T)
    /// CSVs (`t_k,resistance`), substrate phase predictions.
    Films {
        /// R(T) CSV files, directories or glob patterns (optional).
        inputs: Vec<String>,
    },
    /// Generate synthetic fixtures.
    Synth {
        #[arg(value_enum, default_value_t = SynthKind::All)]
        kind: SynthKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// S21 traces of one resonator across drive power, with sidecars.
    Traces,
    /// Loss datasets over power and temperature for the reference resonators.
    Loss,
    /// Power-sweep dataset at base temperature.
    Power,
    /// Frequency-shift datasets for the reference resonators.
    Shift,
    /// R(T) curves of films of several thicknesses.
    Rt,
    All,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::ConfigError as i32
            } else {
                ExitStatus::Success as i32
            };
        }
    };
    let flags = Flags {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        attenuation_db: cli.attenuation_db,
    };
    let result = dispatch(cli.command, &flags);
    match result {
        Ok(status) => status as i32,
        Err(e) => {
            eprintln!("resq: {e}");
            match e {
                CliError::Config(_) => ExitStatus::ConfigError as i32,
                CliError::Io(..) => ExitStatus::TotalFailure as i32,
            }
        }
    }
}

fn dispatch(command: Command, flags: &Flags) -> Result<ExitStatus, CliError> {
    match command {
        Command::FitTraces { inputs } => {
            traces::run(&Settings::resolve(Pipeline::Circlefit, flags, &inputs)?)
        }
        Command::FitPower { inputs } => {
            sweeps::run_power(&Settings::resolve(Pipeline::Powersweep, flags, &inputs)?)
        }
        Command::FitTemp { inputs } => {
            sweeps::run_temp(&Settings::resolve(Pipeline::Tempsweep, flags, &inputs)?)
        }
        Command::FitShift { inputs } => {
            sweeps::run_shift(&Settings::resolve(Pipeline::Freqshift, flags, &inputs)?)
        }
        Command::Films { inputs } => {
            films::run(&Settings::resolve(Pipeline::Films, flags, &inputs)?)
        }
        Command::Synth { kind } => {
            synth::run(&Settings::resolve(Pipeline::Synth, flags, &[])?, kind)
        }
    }
}
