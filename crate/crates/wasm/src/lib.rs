//! Browser bindings: each call returns a JSON object with an `svg` chart and
//! the numbers behind it, or an `error` string.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use resq_core::circlefit::{fit_circle, linewidth_grid, synth_s21, NotchModelParams};
use resq_core::films::{classify_phase_by_resistivity, composite_resistivity, FilmStack};
use resq_core::models::{loss_breakdown, reference_loss_params};
use resq_core::plot::{Chart, Scale, Series};
use resq_core::sweepfit::synth::log_grid;

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v),
        Err(e) => serde_json::to_string(&json!({ "error": e })),
    }
    .unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"))
}

/// Synthesizes a noisy notch trace and fits it.
///
/// `snr` is the circle radius over the per-quadrature noise.
pub fn circle_fit_demo(
    q_i: f64,
    q_c: f64,
    phi0: f64,
    snr: f64,
    seed: u64,
) -> Result<serde_json::Value, String> {
    if !(snr > 0.0) {
        return Err(format!("SNR must be positive, got {snr}"));
    }
    let truth = NotchModelParams::from_qi(4.8e9, q_i, q_c, phi0, 0.8, 0.6, 30e-9);
    truth.validate().map_err(|e| e.to_string())?;
    let grid = linewidth_grid(&truth, 5.0, 201);
    let noise = truth.amp * truth.q_l / (2.0 * truth.q_c_mag) / snr;
    let trace = synth_s21(&truth, &grid, noise, seed).map_err(|e| e.to_string())?;
    let fit = fit_circle(&trace).map_err(|e| e.to_string())?;

    let data: Vec<(f64, f64)> = trace.s21.iter().map(|z| (z.re, z.im)).collect();
    let fine = linewidth_grid(&fit.params, 8.0, 801);
    let model: Vec<(f64, f64)> = fine
        .iter()
        .map(|&f| fit.params.s21(f))
        .map(|z| (z.re, z.im))
        .collect();
    let svg = Chart::new(
        "S21 in the complex plane",
        "Re S21",
        "Im S21",
        Scale::Linear,
        Scale::Linear,
    )
    .with_series(Series::markers("data", data))
    .with_series(Series::line("fit", model))
    .to_svg()
    .map_err(|e| e.to_string())?;
    Ok(json!({
        "svg": svg,
        "true_q_i": truth.q_i(),
        "q_i": fit.q_i,
        "q_i_stderr": fit.stderr.q_i,
        "q_l": fit.params.q_l,
        "q_c": fit.params.q_c_mag,
        "f_res_hz": fit.params.f_res,
        "snr": fit.snr,
    }))
}

/// Q_int versus temperature for one reference parameter row (1-based),
/// with the per-channel limits.
pub fn qint_vs_t_demo(row: usize, n_ph: f64) -> Result<serde_json::Value, String> {
    let rows = reference_loss_params();
    let p = row
        .checked_sub(1)
        .and_then(|k| rows.get(k))
        .ok_or_else(|| format!("row must be 1 to {}", rows.len()))?;
    let temps = log_grid(0.01, 2.0, 200);
    let mut total = Vec::new();
    let mut tls = Vec::new();
    let mut qp = Vec::new();
    for &t in &temps {
        let b = loss_breakdown(p, n_ph, t).map_err(|e| e.to_string())?;
        total.push((t, b.q_int()));
        tls.push((t, 1.0 / b.tls));
        if b.qp > 0.0 && 1.0 / b.qp < 1e12 {
            qp.push((t, 1.0 / b.qp));
        }
    }
    let other = vec![(temps[0], p.q_other), (temps[temps.len() - 1], p.q_other)];
    let title = format!("Resonator {row}, n_ph = {n_ph}");
    let mut chart = Chart::new(&title, "temperature (K)", "Q", Scale::Log, Scale::Log)
        .with_series(Series::line("Q_int", total.clone()))
        .with_series(Series::line("Q_TLS", tls));
    if !qp.is_empty() {
        chart = chart.with_series(Series::line("Q_QP", qp));
    }
    let svg = chart
        .with_series(Series::line("Q_other", other))
        .to_svg()
        .map_err(|e| e.to_string())?;
    let peak = total
        .iter()
        .cloned()
        .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Ok(json!({
        "svg": svg,
        "params": p,
        "q_int_at_lowest_t": total[0].1,
        "peak_t_k": peak.0,
        "peak_q_int": peak.1,
    }))
}

/// Two-layer resistivity ρ(h) for a β seed layer under α.
pub fn resistivity_demo(
    rho_beta: f64,
    rho_alpha: f64,
    beta_layer_nm: f64,
) -> Result<serde_json::Value, String> {
    let lo = beta_layer_nm.max(1.0) * 1.05;
    let hs = log_grid(lo, 1200.0f64.max(2.0 * lo), 160);
    let stack = |h: f64| FilmStack {
        beta_layer_nm,
        ..FilmStack::new(h, rho_beta, rho_alpha)
    };
    let curve = hs
        .iter()
        .map(|&h| composite_resistivity(&stack(h)).map(|r| (h, r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let table: Vec<_> = [15.0, 20.0, 50.0, 150.0]
        .iter()
        .filter(|&&h| h > beta_layer_nm)
        .filter_map(|&h| composite_resistivity(&stack(h)).ok().map(|r| (h, r)))
        .map(|(h, r)| json!({ "h_nm": h, "rho": r, "phase": classify_phase_by_resistivity(r) }))
        .collect();
    let svg = Chart::new(
        "Resistivity of a two-layer film",
        "thickness (nm)",
        "resistivity (µΩ·cm)",
        Scale::Log,
        Scale::Linear,
    )
    .with_series(Series::line("composite", curve))
    .with_series(Series::line(
        "alpha",
        vec![(hs[0], rho_alpha), (hs[hs.len() - 1], rho_alpha)],
    ))
    .to_svg()
    .map_err(|e| e.to_string())?;
    Ok(json!({ "svg": svg, "table": table }))
}

#[wasm_bindgen]
pub fn circle_fit(q_i: f64, q_c: f64, phi0: f64, snr: f64, seed: u32) -> String {
    respond(circle_fit_demo(q_i, q_c, phi0, snr, u64::from(seed)))
}

#[wasm_bindgen]
pub fn qint_vs_t(row: u32, n_ph: f64) -> String {
    respond(qint_vs_t_demo(row as usize, n_ph))
}

#[wasm_bindgen]
pub fn resistivity(rho_beta: f64, rho_alpha: f64, beta_layer_nm: f64) -> String {
    respond(resistivity_demo(rho_beta, rho_alpha, beta_layer_nm))
}
