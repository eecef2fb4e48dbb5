//! `fit-traces`: circle fits of S21 traces, per-trace reports, an aggregate
//! table and per-resonator sweep datasets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use resq_core::circlefit::{fit_circle, photons_in_resonator, CircleFitError, CircleFitResult};
use resq_core::plot::{Chart, Scale, Series};
use resq_core::sweepfit::{time_average, LossPoint, SweepDataset, TimedLossSample};

use crate::config::{expand_inputs, Settings};
use crate::io::{read_sidecar, read_trace_csv};
use crate::report::{slug, unique_name, Batch};
use crate::{CliError, ExitStatus};

/// One successful trace fit with its acquisition metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub source: String,
    pub resonator_id: String,
    /// Power at the line input, dBm.
    pub applied_power_dbm: Option<f64>,
    pub attenuation_db: f64,
    /// Power at the chip, dBm.
    pub chip_power_dbm: Option<f64>,
    pub temperature_k: Option<f64>,
    pub time_s: Option<f64>,
    /// Mean photon number in the resonator.
    pub n_ph: Option<f64>,
    pub fit: CircleFitResult,
}

pub fn failure_reason(e: &CircleFitError) -> &'static str {
    match e {
        CircleFitError::InvalidTrace(_) => "invalid-trace",
        CircleFitError::InvalidParams(_) => "invalid-params",
        CircleFitError::NonConvergence(_) => "non-convergence",
        CircleFitError::OffResonance(_) => "off-resonance",
        CircleFitError::DegenerateCircle { .. } => "degenerate-circle",
        CircleFitError::NonPositiveQi { .. } => "non-positive-qi",
        CircleFitError::MissingPower => "missing-power",
    }
}

fn fit_one(
    path: &std::path::Path,
    settings: &Settings,
) -> Result<TraceReport, (&'static str, String)> {
    let sidecar = read_sidecar(path)
        .map_err(|e| (e.reason, e.message))?
        .unwrap_or_default();
    let stem = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let resonator_id = sidecar.resonator_id.clone().unwrap_or(stem);
    let mut trace = read_trace_csv(path, &resonator_id).map_err(|e| (e.reason, e.message))?;
    let attenuation_db = settings
        .attenuation_db
        .or(sidecar.attenuation_db)
        .unwrap_or(0.0);
    let chip_power_dbm = sidecar.power_dbm.map(|p| p - attenuation_db);
    let temperature_k = sidecar.temperature_k.or(settings.temperature_k);
    trace.drive_power_dbm = chip_power_dbm;
    trace.temperature_k = temperature_k;
    let fit = fit_circle(&trace).map_err(|e| (failure_reason(&e), e.to_string()))?;
    let n_ph = chip_power_dbm.and_then(|_| photons_in_resonator(&fit, None, 0.0).ok());
    Ok(TraceReport {
        source: path.display().to_string(),
        resonator_id,
        applied_power_dbm: sidecar.power_dbm,
        attenuation_db,
        chip_power_dbm,
        temperature_k,
        time_s: sidecar.time_s,
        n_ph,
        fit,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn aggregate_csv(reports: &[TraceReport]) -> String {
    let mut s = String::from(
        "source,resonator_id,power_dbm,temperature_k,f_res_hz,q_l,q_c,q_i,q_i_stderr,n_ph\n",
    );
    for r in reports {
        let p = &r.fit.params;
        let fields = [
            r.source.clone(),
            r.resonator_id.clone(),
            opt(r.chip_power_dbm),
            opt(r.temperature_k),
            p.f_res.to_string(),
            p.q_l.to_string(),
            p.q_c_mag.to_string(),
            r.fit.q_i.to_string(),
            opt(r.fit.stderr.q_i),
            opt(r.n_ph),
        ];
        let quoted: Vec<String> = fields
            .iter()
            .map(|f| {
                if f.contains([',', '"', '\n']) {
                    format!("\"{}\"", f.replace('"', "\"\""))
                } else {
                    f.clone()
                }
            })
            .collect();
        s.push_str(&quoted.join(","));
        s.push('\n');
    }
    s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Loss dataset of one resonator from its fits that carry both a photon
/// number and a temperature. Repeated fits are time-averaged when a window
/// is configured and every fit has an acquisition time.
fn dataset_for(
    id: &str,
    reports: &[&TraceReport],
    settings: &Settings,
) -> Result<Option<SweepDataset>, String> {
    let usable: Vec<&&TraceReport> = reports
        .iter()
        .filter(|r| r.n_ph.is_some() && r.temperature_k.is_some())
        .collect();
    if usable.is_empty() {
        return Ok(None);
    }
    let f0 = median(usable.iter().map(|r| r.fit.params.f_res).collect());
    let timed = usable.iter().all(|r| r.time_s.is_some());
    let points = match settings.averaging_window_s {
        Some(window) if timed => {
            let samples: Vec<TimedLossSample> = usable
                .iter()
                .map(|r| TimedLossSample {
                    time_s: r.time_s.unwrap_or_default(),
                    n_ph: r.n_ph.unwrap_or_default(),
                    t_k: r.temperature_k.unwrap_or_default(),
                    q_i: r.fit.q_i,
                    q_i_sigma: r.fit.stderr.q_i,
                })
                .collect();
            time_average(&samples, window).map_err(|e| e.to_string())?
        }
        _ => usable
            .iter()
            .map(|r| LossPoint {
                n_ph: r.n_ph.unwrap_or_default(),
                t_k: r.temperature_k.unwrap_or_default(),
                q_i: r.fit.q_i,
                q_i_sigma: r.fit.stderr.q_i.filter(|s| *s > 0.0),
            })
            .collect(),
    };
    Ok(Some(SweepDataset::from_loss(id, f0, settings.tc_k, points)))
}

pub fn run(settings: &Settings) -> Result<ExitStatus, CliError> {
    let files = expand_inputs(&settings.inputs, "csv")?;
    let mut batch = Batch::new("fit-traces", settings.seed, &settings.out_dir);
    let mut taken = BTreeSet::new();
    let mut reports = Vec::new();
    for path in &files {
        batch.input();
        let source = path.display().to_string();
        match fit_one(path, settings) {
            Ok(report) => {
                let stem = path
                    .file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                let name = unique_name(&mut taken, &slug(&stem));
                batch.write_json(&format!("fits/{name}.json"), &report)?;
                batch.success();
                reports.push(report);
            }
            Err((reason, message)) => batch.fail(&source, reason, message),
        }
    }
    batch.write_text("aggregate.csv", &aggregate_csv(&reports))?;

    let mut by_id: BTreeMap<&str, Vec<&TraceReport>> = BTreeMap::new();
    for r in &reports {
        by_id.entry(&r.resonator_id).or_default().push(r);
    }
    let mut chart = Chart::new(
        "Internal quality factor versus photon number",
        "mean photon number",
        "Q_i",
        Scale::Log,
        Scale::Log,
    );
    for (id, group) in &by_id {
        match dataset_for(id, group, settings) {
            Ok(Some(data)) => batch.write_json(&format!("datasets/{}.json", slug(id)), &data)?,
            Ok(None) => log::info!("{id}: no power and temperature metadata, no dataset written"),
            Err(e) => batch.fail(id, "invalid-data", e),
        }
        let pts: Vec<(usize, (f64, f64))> = group
            .iter()
            .enumerate()
            .filter_map(|(k, r)| r.n_ph.map(|n| (k, (n, r.fit.q_i))))
            .collect();
        if !pts.is_empty() {
            let errs = pts
                .iter()
                .map(|(k, _)| group[*k].fit.stderr.q_i.unwrap_or(0.0))
                .collect();
            chart = chart.with_series(
                Series::markers(id, pts.into_iter().map(|(_, p)| p).collect()).with_errors(errs),
            );
        }
    }
    if let Ok(svg) = chart.to_svg() {
        batch.write_text("qi_vs_nph.svg", &svg)?;
    }
    batch.finish()
}
