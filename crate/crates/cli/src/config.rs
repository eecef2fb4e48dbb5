//! Run configuration: a JSON file merged with command-line flags.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use resq_core::models::REFERENCE_TC;
use resq_core::sweepfit::{FitOptions, ResidualScale};

use crate::schemas;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Circlefit,
    Powersweep,
    Tempsweep,
    Freqshift,
    Films,
    Synth,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmsConfig {
    pub thicknesses_nm: Option<Vec<f64>>,
    pub rho_beta: Option<f64>,
    pub rho_alpha: Option<f64>,
    pub beta_layer_nm: Option<f64>,
    /// Substrate table to classify; the shipped fixture when absent.
    pub substrates: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub count: Option<usize>,
    /// Circle radius over per-quadrature noise for synthetic traces.
    pub snr: Option<f64>,
    /// Relative Q noise for synthetic sweep datasets.
    pub relative_noise: Option<f64>,
    /// Absolute δf/f₀ noise for synthetic shift datasets.
    pub shift_noise: Option<f64>,
}

/// Contents of a `--config` file. Relative paths are resolved against the
/// directory holding the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Line attenuation between the power reference and the chip, dB.
    pub attenuation_db: Option<f64>,
    /// Window for averaging repeated Q_i fits, seconds.
    pub averaging_window_s: Option<f64>,
    /// Film Tc written into datasets built from trace fits, K.
    pub tc_k: Option<f64>,
    /// Temperature for power-law fits; the median point temperature if absent.
    pub temperature_k: Option<f64>,
    pub random_starts: Option<usize>,
    pub residuals: Option<ResidualScale>,
    pub films: Option<FilmsConfig>,
    pub synth: Option<SynthConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        schemas::validate(schemas::RUN_CONFIG, &value)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        cfg.inputs = cfg
            .inputs
            .iter()
            .map(|s| rebase(Path::new(s)).to_string_lossy().into_owned())
            .collect();
        cfg.out_dir = cfg.out_dir.as_deref().map(rebase);
        if let Some(f) = cfg.films.as_mut() {
            f.substrates = f.substrates.as_deref().map(rebase);
        }
        Ok(cfg)
    }
}

/// Command-line flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub attenuation_db: Option<f64>,
}

/// Effective settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: Pipeline,
    pub inputs: Vec<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub attenuation_db: Option<f64>,
    pub averaging_window_s: Option<f64>,
    pub tc_k: f64,
    pub temperature_k: Option<f64>,
    pub fit: FitOptions,
    pub films: FilmsConfig,
    pub synth: SynthConfig,
}

pub const DEFAULT_OUT_DIR: &str = "resq-out";

impl Settings {
    pub fn resolve(
        pipeline: Pipeline,
        flags: &Flags,
        positional: &[String],
    ) -> Result<Self, CliError> {
        let cfg = match &flags.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = cfg.pipeline {
            if p != pipeline {
                return Err(CliError::Config(format!(
                    "config selects pipeline {p:?} but the subcommand runs {pipeline:?}"
                )));
            }
        }
        let inputs = if positional.is_empty() {
            cfg.inputs
        } else {
            positional.to_vec()
        };
        let seed = flags.seed.or(cfg.seed).unwrap_or(0);
        let mut fit = FitOptions {
            seed,
            ..FitOptions::default()
        };
        if let Some(n) = cfg.random_starts {
            fit.random_starts = n;
        }
        if let Some(r) = cfg.residuals {
            fit.residuals = r;
        }
        let attenuation_db = flags.attenuation_db.or(cfg.attenuation_db);
        if let Some(a) = attenuation_db {
            if !a.is_finite() {
                return Err(CliError::Config(format!("attenuation {a} dB")));
            }
        }
        if let Some(w) = cfg.averaging_window_s {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CliError::Config(format!("averaging window {w} s")));
            }
        }
        let tc_k = cfg.tc_k.unwrap_or(REFERENCE_TC);
        if !(tc_k > 0.0 && tc_k.is_finite()) {
            return Err(CliError::Config(format!("tc_k = {tc_k}")));
        }
        Ok(Self {
            pipeline,
            inputs,
            out_dir: flags
                .out
                .clone()
                .or(cfg.out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            seed,
            attenuation_db,
            averaging_window_s: cfg.averaging_window_s,
            tc_k,
            temperature_k: cfg.temperature_k,
            fit,
            films: cfg.films.unwrap_or_default(),
            synth: cfg.synth.unwrap_or_default(),
        })
    }
}

/// Expands input specs into a sorted, de-duplicated file list. A spec is a
/// file, a directory (files with extension `ext` directly inside it) or a
/// glob pattern. Missing inputs are a configuration error.
pub fn expand_inputs(specs: &[String], ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = BTreeSet::new();
    for spec in specs {
        let path = Path::new(spec);
        if path.is_dir() {
            let entries =
                fs::read_dir(path).map_err(|e| CliError::Config(format!("{spec}: {e}")))?;
            for entry in entries.flatten() {
                let p = entry.path();
                if p.is_file() && p.extension().is_some_and(|e| e == ext) {
                    out.insert(p);
                }
            }
        } else if path.is_file() {
            out.insert(path.to_path_buf());
        } else if spec.contains(['*', '?', '[']) {
            let matches = glob::glob(spec).map_err(|e| CliError::Config(format!("{spec}: {e}")))?;
            let before = out.len();
            out.extend(matches.flatten().filter(|p| p.is_file()));
            if out.len() == before {
                return Err(CliError::Config(format!(
                    "{spec}: pattern matched no files"
                )));
            }
        } else {
            return Err(CliError::Config(format!(
                "{spec}: no such file or directory"
            )));
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no input files".into()));
    }
    Ok(out.into_iter().collect())
}
