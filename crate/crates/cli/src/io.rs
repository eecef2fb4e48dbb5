//! File formats: trace CSV with JSON sidecar, dataset JSON, R(T) CSV, and
//! atomic output writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use resq_core::circlefit::ComplexTrace;
use resq_core::films::RtCurve;
use resq_core::sweepfit::SweepDataset;

use crate::schemas;

/// Problem reading one input file; recorded as a per-file failure.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub reason: &'static str,
    pub message: String,
}

impl InputError {
    fn parse(message: String) -> Self {
        Self {
            reason: "parse-error",
            message,
        }
    }

    fn schema(message: String) -> Self {
        Self {
            reason: "schema-error",
            message,
        }
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory and
/// a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::other("output path has no file name"))?;
    let tmp = dir.unwrap_or(Path::new(".")).join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Pretty JSON with a trailing newline. Field order follows the types, so
/// output is byte-stable for equal values.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Per-trace metadata stored next to the CSV as `<stem>.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSidecar {
    pub resonator_id: Option<String>,
    /// Power at the line input, dBm.
    pub power_dbm: Option<f64>,
    pub temperature_k: Option<f64>,
    /// Attenuation between line input and chip, dB.
    pub attenuation_db: Option<f64>,
    /// Acquisition time, s, for averaging repeated fits.
    pub time_s: Option<f64>,
}

pub fn sidecar_path(trace: &Path) -> PathBuf {
    trace.with_extension("json")
}

pub fn read_sidecar(trace: &Path) -> Result<Option<TraceSidecar>, InputError> {
    let path = sidecar_path(trace);
    if !path.is_file() {
        return Ok(None);
    }
    let value = read_json_value(&path)?;
    schemas::validate(schemas::TRACE_SIDECAR, &value)
        .map_err(|e| InputError::schema(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value)
        .map(Some)
        .map_err(|e| InputError::schema(format!("{}: {e}", path.display())))
}

fn read_json_value(path: &Path) -> Result<serde_json::Value, InputError> {
    let text = fs::read_to_string(path)
        .map_err(|e| InputError::parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| InputError::parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TraceColumns {
    ReIm,
    MagPhase,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, InputError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| InputError::parse(format!("{}: {e}", path.display())))
}

fn parse_row(
    path: &Path,
    record: &csv::StringRecord,
    width: usize,
) -> Result<Vec<f64>, InputError> {
    let line = record.position().map_or(0, |p| p.line());
    if record.len() != width {
        return Err(InputError::parse(format!(
            "{}:{line}: expected {width} fields, found {}",
            path.display(),
            record.len()
        )));
    }
    record
        .iter()
        .map(|field| {
            field.parse::<f64>().map_err(|_| {
                InputError::parse(format!(
                    "{}:{line}: not a number: {field:?}",
                    path.display()
                ))
            })
        })
        .collect()
}

/// Reads a trace CSV with header `freq_hz,re,im` or `freq_hz,mag_db,phase_rad`.
pub fn read_trace_csv(path: &Path, resonator_id: &str) -> Result<ComplexTrace, InputError> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| InputError::parse(format!("{}: {e}", path.display())))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let columns = match names.as_slice() {
        ["freq_hz", "re", "im"] => TraceColumns::ReIm,
        ["freq_hz", "mag_db", "phase_rad"] => TraceColumns::MagPhase,
        other => {
            return Err(InputError::parse(format!(
                "{}:1: header {other:?} is neither freq_hz,re,im nor freq_hz,mag_db,phase_rad",
                path.display()
            )))
        }
    };
    let mut freqs = Vec::new();
    let mut s21 = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| InputError::parse(format!("{}: {e}", path.display())))?;
        let v = parse_row(path, &record, 3)?;
        freqs.push(v[0]);
        s21.push(match columns {
            TraceColumns::ReIm => Complex64::new(v[1], v[2]),
            TraceColumns::MagPhase => Complex64::from_polar(10f64.powf(v[1] / 20.0), v[2]),
        });
    }
    Ok(ComplexTrace {
        resonator_id: resonator_id.to_string(),
        freqs,
        s21,
        drive_power_dbm: None,
        temperature_k: None,
    })
}

/// Trace CSV in the `freq_hz,re,im` layout with shortest round-trip floats.
pub fn trace_csv(trace: &ComplexTrace) -> String {
    let mut s = String::from("freq_hz,re,im\n");
    for (f, z) in trace.freqs.iter().zip(&trace.s21) {
        s.push_str(&format!("{f},{},{}\n", z.re, z.im));
    }
    s
}

/// Reads an R(T) CSV with header `t_k,resistance`.
pub fn read_rt_csv(path: &Path) -> Result<RtCurve, InputError> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| InputError::parse(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["t_k", "resistance"] {
        return Err(InputError::parse(format!(
            "{}:1: expected header t_k,resistance",
            path.display()
        )));
    }
    let mut temps = Vec::new();
    let mut resistance = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| InputError::parse(format!("{}: {e}", path.display())))?;
        let v = parse_row(path, &record, 2)?;
        temps.push(v[0]);
        resistance.push(v[1]);
    }
    let label = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(RtCurve {
        label,
        temps,
        resistance,
    })
}

pub fn rt_csv(curve: &RtCurve) -> String {
    let mut s = String::from("t_k,resistance\n");
    for (t, r) in curve.temps.iter().zip(&curve.resistance) {
        s.push_str(&format!("{t},{r}\n"));
    }
    s
}

/// Reads and schema-checks a dataset JSON. Diagnostics name the line and
/// column for syntax errors and the JSON pointer for schema violations.
pub fn read_dataset(path: &Path) -> Result<SweepDataset, InputError> {
    let value = read_json_value(path)?;
    schemas::validate(schemas::DATASET, &value)
        .map_err(|e| InputError::schema(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value)
        .map_err(|e| InputError::schema(format!("{}: {e}", path.display())))
}
