//! `synth`: seeded synthetic traces, sweep datasets and R(T) curves.

use std::f64::consts::PI;

use serde::Serialize;

use resq_core::circlefit::{dbm_to_watts, linewidth_grid, synth_s21, NotchModelParams};
use resq_core::constants::HBAR;
use resq_core::films::{synth_rt_curve, TC_THICKNESS_ANCHORS};
use resq_core::models::{
    q_int_power, reference_loss_params, reference_shift_params, PowerLawTlsParams, REFERENCE_F0,
    REFERENCE_TC,
};
use resq_core::sweepfit::synth::{
    log_grid, synth_loss_dataset, synth_power_dataset, synth_shift_dataset,
};

use crate::config::Settings;
use crate::io::{rt_csv, trace_csv, TraceSidecar};
use crate::report::Batch;
use crate::{CliError, ExitStatus, SynthKind};

pub const DEFAULT_TRACE_COUNT: usize = 10;
pub const DEFAULT_TRACE_SNR: f64 = 30.0;
pub const DEFAULT_RELATIVE_NOISE: f64 = 0.03;
/// Absolute δf/f₀ noise of synthetic shift datasets.
pub const SHIFT_NOISE: f64 = 2e-9;
/// Line attenuation written into synthetic sidecars when none is set, dB.
pub const DEFAULT_SYNTH_ATTENUATION_DB: f64 = 70.0;
/// Chip power range of synthetic traces, dBm.
pub const CHIP_POWER_RANGE_DBM: (f64, f64) = (-160.0, -70.0);
pub const LOSS_TEMPERATURES_K: [f64; 5] = [0.02, 0.3, 0.6, 0.9, 1.2];

/// Power-law TLS resonator used for synthetic traces and power sweeps.
pub fn synthetic_power_resonator() -> PowerLawTlsParams {
    PowerLawTlsParams {
        q_tls0: 1.5e6,
        n_c: 30.0,
        beta_exp: 0.4,
        q_other: 2e7,
        temperature: 0.02,
        f0: REFERENCE_F0,
    }
}

const TRACE_Q_C: f64 = 8e5;
const TRACE_PHI0: f64 = 0.15;
const TRACE_AMP: f64 = 0.6;
const TRACE_ALPHA: f64 = 1.2;
const TRACE_TAU: f64 = 45e-9;

/// Photon number and Q_i consistent with each other at chip power `dbm`.
fn self_consistent_qi(truth: &PowerLawTlsParams, dbm: f64) -> (f64, f64) {
    let omega = 2.0 * PI * truth.f0;
    let p = dbm_to_watts(dbm);
    let mut n = 1.0;
    let mut q_i = truth.q_tls0;
    for _ in 0..200 {
        q_i = q_int_power(truth, n).expect("valid synthetic parameters");
        let q_l = 1.0 / (1.0 / q_i + TRACE_PHI0.cos() / TRACE_Q_C);
        let next = 2.0 * q_l * q_l / (TRACE_Q_C * HBAR * omega * omega) * p;
        if (next / n - 1.0).abs() < 1e-14 {
            n = next;
            break;
        }
        n = next;
    }
    (n, q_i)
}

#[derive(Serialize)]
struct TraceTruth {
    file: String,
    chip_power_dbm: f64,
    n_ph: f64,
    q_i: f64,
    params: NotchModelParams,
}

fn traces(settings: &Settings, batch: &mut Batch) -> Result<(), CliError> {
    let count = settings.synth.count.unwrap_or(DEFAULT_TRACE_COUNT);
    let snr = settings.synth.snr.unwrap_or(DEFAULT_TRACE_SNR);
    let attenuation = settings
        .attenuation_db
        .unwrap_or(DEFAULT_SYNTH_ATTENUATION_DB);
    let truth = synthetic_power_resonator();
    let (lo, hi) = CHIP_POWER_RANGE_DBM;
    let mut truths = Vec::new();
    for k in 0..count {
        let chip = if count == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (count - 1) as f64
        };
        let (n_ph, q_i) = self_consistent_qi(&truth, chip);
        let params = NotchModelParams::from_qi(
            truth.f0,
            q_i,
            TRACE_Q_C,
            TRACE_PHI0,
            TRACE_AMP,
            TRACE_ALPHA,
            TRACE_TAU,
        );
        let sigma = params.amp * params.q_l / (2.0 * params.q_c_mag) / snr;
        let trace = synth_s21(
            &params,
            &linewidth_grid(&params, 5.0, 201),
            sigma,
            settings.seed + k as u64,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let name = format!("trace_{k:03}");
        batch.write_text(&format!("traces/{name}.csv"), &trace_csv(&trace))?;
        batch.write_json(
            &format!("traces/{name}.json"),
            &TraceSidecar {
                resonator_id: Some("S1".into()),
                power_dbm: Some(chip + attenuation),
                temperature_k: Some(truth.temperature),
                attenuation_db: Some(attenuation),
                time_s: None,
            },
        )?;
        truths.push(TraceTruth {
            file: format!("{name}.csv"),
            chip_power_dbm: chip,
            n_ph,
            q_i,
            params,
        });
        batch.success();
    }
    batch.write_json("truth/traces.json", &truths)
}

fn loss(settings: &Settings, batch: &mut Batch) -> Result<(), CliError> {
    let noise = settings
        .synth
        .relative_noise
        .unwrap_or(DEFAULT_RELATIVE_NOISE);
    for (k, p) in reference_loss_params().iter().enumerate() {
        let id = format!("R{}", k + 1);
        let data = synth_loss_dataset(
            &id,
            p,
            &log_grid(1.0, 1e5, 6),
            &LOSS_TEMPERATURES_K,
            noise,
            settings.seed.wrapping_add(100 + k as u64),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        batch.write_json(&format!("datasets/loss_{id}.json"), &data)?;
        batch.write_json(&format!("truth/loss_{id}.json"), p)?;
        batch.success();
    }
    Ok(())
}

fn power(settings: &Settings, batch: &mut Batch) -> Result<(), CliError> {
    let noise = settings
        .synth
        .relative_noise
        .unwrap_or(DEFAULT_RELATIVE_NOISE);
    let truth = synthetic_power_resonator();
    let data = synth_power_dataset(
        "S1",
        &truth,
        REFERENCE_TC,
        &log_grid(1.0, 1e7, 29),
        noise,
        settings.seed.wrapping_add(200),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    batch.write_json("datasets/power_S1.json", &data)?;
    batch.write_json("truth/power_S1.json", &truth)?;
    batch.success();
    Ok(())
}

fn shift(settings: &Settings, batch: &mut Batch) -> Result<(), CliError> {
    let noise = settings.synth.shift_noise.unwrap_or(SHIFT_NOISE);
    for (k, p) in reference_shift_params().iter().enumerate() {
        let id = format!("R{}", k + 1);
        let data = synth_shift_dataset(
            &id,
            p,
            &log_grid(0.02, 1.5, 25),
            noise,
            SHIFT_NOISE,
            settings.seed.wrapping_add(300 + k as u64),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        batch.write_json(&format!("datasets/shift_{id}.json"), &data)?;
        batch.write_json(&format!("truth/shift_{id}.json"), p)?;
        batch.success();
    }
    Ok(())
}

/// Dense below 20 K for the transition, coarse up to room temperature.
fn rt_temperatures() -> Vec<f64> {
    let mut t: Vec<f64> = (0..1900).map(|k| 1.0 + 0.01 * k as f64).collect();
    t.extend((20..=300).map(|k| k as f64));
    t
}

fn rt(batch: &mut Batch) -> Result<(), CliError> {
    let temps = rt_temperatures();
    for (h, tc) in TC_THICKNESS_ANCHORS {
        let curve = synth_rt_curve(&format!("{h} nm"), Some(tc), 0.05, 9.9, &temps);
        batch.write_text(&format!("rt/rt_{h:.0}nm.csv"), &rt_csv(&curve))?;
        batch.success();
    }
    let beta = synth_rt_curve("beta", None, 0.05, 0.95, &temps);
    batch.write_text("rt/rt_beta.csv", &rt_csv(&beta))?;
    batch.success();
    Ok(())
}

pub fn run(settings: &Settings, kind: SynthKind) -> Result<ExitStatus, CliError> {
    let mut batch = Batch::new("synth", settings.seed, &settings.out_dir);
    let all = kind == SynthKind::All;
    if all || kind == SynthKind::Traces {
        traces(settings, &mut batch)?;
    }
    if all || kind == SynthKind::Loss {
        loss(settings, &mut batch)?;
    }
    if all || kind == SynthKind::Power {
        power(settings, &mut batch)?;
    }
    if all || kind == SynthKind::Shift {
        shift(settings, &mut batch)?;
    }
    if all || kind == SynthKind::Rt {
        rt(&mut batch)?;
    }
    batch.finish()
}
