//! `fit-power`, `fit-temp` and `fit-shift`: sweep-dataset fits with a
//! report and a data-plus-model plot per dataset.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use resq_core::models::{freq_shift_total, q_int_power, q_int_total};
use resq_core::plot::{Chart, Scale, Series};
use resq_core::sweepfit::{
    fit_freq_shift, fit_power_sweep, fit_qint_vs_t, synth::log_grid, FitReport, SweepDataset,
    SweepFitError,
};

use crate::config::{expand_inputs, Settings};
use crate::io::read_dataset;
use crate::report::{slug, unique_name, Batch};
use crate::{CliError, ExitStatus};

pub fn failure_reason(e: &SweepFitError) -> &'static str {
    match e {
        SweepFitError::InvalidData(_) => "invalid-data",
        SweepFitError::InsufficientData { .. } => "insufficient-data",
        SweepFitError::Model(_) => "model-error",
        SweepFitError::Optimizer(_) => "optimizer-error",
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
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

/// Runs `fit` on every dataset and writes `<id>.<suffix>.json` and `.svg`.
fn run_batch<P: Serialize>(
    command: &'static str,
    suffix: &str,
    settings: &Settings,
    fit: impl Fn(&SweepDataset) -> Result<(FitReport<P>, Chart), SweepFitError>,
) -> Result<ExitStatus, CliError> {
    let files = expand_inputs(&settings.inputs, "json")?;
    let mut batch = Batch::new(command, settings.seed, &settings.out_dir);
    let mut taken = BTreeSet::new();
    for path in &files {
        batch.input();
        let source = path.display().to_string();
        let data = match read_dataset(path) {
            Ok(d) => d,
            Err(e) => {
                batch.fail_input(&source, e);
                continue;
            }
        };
        match fit(&data) {
            Ok((report, chart)) => {
                let name = unique_name(&mut taken, &slug(&data.resonator_id));
                batch.write_json(&format!("{name}.{suffix}.json"), &report)?;
                if let Ok(svg) = chart.to_svg() {
                    batch.write_text(&format!("{name}.{suffix}.svg"), &svg)?;
                }
                batch.success();
            }
            Err(e) => batch.fail(&source, failure_reason(&e), e.to_string()),
        }
    }
    batch.finish()
}

fn title(data: &SweepDataset, what: &str) -> String {
    format!("{}: {what}", data.resonator_id)
}

pub fn run_power(settings: &Settings) -> Result<ExitStatus, CliError> {
    run_batch("fit-power", "power", settings, |data| {
        let points = data.loss_points()?;
        let temperature = settings
            .temperature_k
            .unwrap_or_else(|| median(points.iter().map(|p| p.t_k).collect()));
        let report = fit_power_sweep(data, temperature, &settings.fit)?;
        let positive: Vec<f64> = points.iter().map(|p| p.n_ph).filter(|n| *n > 0.0).collect();
        let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = positive.iter().cloned().fold(0.0, f64::max);
        let mut chart = Chart::new(
            &title(data, "Q_i versus photon number"),
            "mean photon number",
            "Q_i",
            Scale::Log,
            Scale::Log,
        )
        .with_series(
            Series::markers("data", points.iter().map(|p| (p.n_ph, p.q_i)).collect())
                .with_errors(points.iter().map(|p| p.sigma()).collect()),
        );
        if lo.is_finite() && hi >= lo {
            let curve = log_grid(lo, hi.max(lo * 1.0001), 200)
                .into_iter()
                .filter_map(|n| q_int_power(&report.params, n).ok().map(|q| (n, q)))
                .collect();
            chart = chart.with_series(Series::line("fit", curve));
        }
        Ok((report, chart))
    })
}

pub fn run_temp(settings: &Settings) -> Result<ExitStatus, CliError> {
    run_batch("fit-temp", "temp", settings, |data| {
        let report = fit_qint_vs_t(data, &settings.fit)?;
        let points = data.loss_points()?;
        let t_lo = points.iter().map(|p| p.t_k).fold(f64::INFINITY, f64::min);
        let t_hi = points.iter().map(|p| p.t_k).fold(0.0, f64::max);
        let powers: BTreeSet<u64> = points.iter().map(|p| p.n_ph.to_bits()).collect();
        let mut chart = Chart::new(
            &title(data, "Q_i versus temperature"),
            "temperature (K)",
            "Q_i",
            Scale::Linear,
            Scale::Log,
        );
        for bits in &powers {
            let n = f64::from_bits(*bits);
            let sel: Vec<_> = points.iter().filter(|p| p.n_ph == n).collect();
            chart = chart.with_series(
                Series::markers(
                    &format!("n = {n:.3e}"),
                    sel.iter().map(|p| (p.t_k, p.q_i)).collect(),
                )
                .with_errors(sel.iter().map(|p| p.sigma()).collect()),
            );
        }
        for bits in &powers {
            let n = f64::from_bits(*bits);
            let curve = linspace(t_lo, t_hi, 200)
                .into_iter()
                .filter_map(|t| q_int_total(&report.params, n, t).ok().map(|q| (t, q)))
                .collect();
            chart = chart.with_series(Series::line(&format!("fit, n = {n:.3e}"), curve));
        }
        Ok((report, chart))
    })
}

pub fn run_shift(settings: &Settings) -> Result<ExitStatus, CliError> {
    run_batch("fit-shift", "shift", settings, |data| {
        let report = fit_freq_shift(data, &settings.fit)?;
        let points = data.shift_points()?;
        let t_lo = points.iter().map(|p| p.t_k).fold(f64::INFINITY, f64::min);
        let t_hi = points.iter().map(|p| p.t_k).fold(0.0, f64::max);
        let curve = linspace(t_lo, t_hi, 200)
            .into_iter()
            .filter_map(|t| freq_shift_total(&report.params, t).ok().map(|d| (t, d)))
            .collect();
        let chart = Chart::new(
            &title(data, "fractional frequency shift versus temperature"),
            "temperature (K)",
            "df/f0",
            Scale::Linear,
            Scale::Linear,
        )
        .with_series(
            Series::markers("data", points.iter().map(|p| (p.t_k, p.df_f0)).collect())
                .with_errors(points.iter().map(|p| p.sigma).collect()),
        )
        .with_series(Series::line("fit", curve));
        Ok((report, chart))
    })
}

/// Loads a dataset the way the commands do; used by tests and tools.
pub fn load(path: &Path) -> Result<SweepDataset, String> {
    read_dataset(path).map_err(|e| e.message)
}
