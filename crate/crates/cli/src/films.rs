//! `films`: resistivity versus thickness, Tc and RRR from R(T) curves, and
//! substrate phase predictions.

use serde::{Deserialize, Serialize};

use resq_core::films::{
    classify_phase_by_resistivity, composite_resistivity, extract_tc, predict_phase, rrr,
    substrate_fixture, tc_vs_thickness, FilmStack, FilmsError, ResistivityPhase, SubstrateFixture,
    TaPhase, DEFAULT_BETA_LAYER_NM, PLATEAU_WINDOW_K, SUBSTRATE_FIXTURE_VERSION,
};
use resq_core::plot::{Chart, Scale, Series};
use resq_core::sweepfit::synth::log_grid;

use crate::config::{expand_inputs, Settings};
use crate::io::read_rt_csv;
use crate::report::Batch;
use crate::{CliError, ExitStatus};

pub const DEFAULT_THICKNESSES_NM: [f64; 4] = [15.0, 20.0, 50.0, 150.0];
pub const DEFAULT_RHO_BETA: f64 = 160.0;
pub const DEFAULT_RHO_ALPHA: f64 = 17.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub beta_layer_nm: f64,
    pub rho_beta: f64,
    pub rho_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistivityRow {
    pub h_nm: f64,
    /// µΩ·cm; absent when the film is no thicker than the β layer.
    pub rho: Option<f64>,
    pub phase: Option<ResistivityPhase>,
    /// Interpolated Tc, K; absent outside the calibrated thickness range.
    pub tc_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub source: String,
    pub label: String,
    pub tc_k: Option<f64>,
    pub multiple_crossings: bool,
    pub rrr: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub id: String,
    pub group: String,
    pub substrate: String,
    pub predicted: TaPhase,
    pub reported: TaPhase,
    pub resistivity: Option<f64>,
    pub resistivity_phase: Option<ResistivityPhase>,
    /// The rule named a phase that contradicts the reported one.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmsReport {
    pub stack: StackSpec,
    pub resistivity: Vec<ResistivityRow>,
    pub curves: Vec<CurveRow>,
    pub substrate_table_version: u32,
    pub phases: Vec<PhaseRow>,
    pub phase_mismatches: usize,
}

fn load_substrates(settings: &Settings) -> Result<SubstrateFixture, CliError> {
    let Some(path) = &settings.films.substrates else {
        return substrate_fixture().map_err(|e| CliError::Config(e.to_string()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let table: SubstrateFixture = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if table.version != SUBSTRATE_FIXTURE_VERSION {
        return Err(CliError::Config(format!(
            "{}: substrate table version {} (expected {SUBSTRATE_FIXTURE_VERSION})",
            path.display(),
            table.version
        )));
    }
    Ok(table)
}

pub fn run(settings: &Settings) -> Result<ExitStatus, CliError> {
    let cfg = &settings.films;
    let stack = StackSpec {
        beta_layer_nm: cfg.beta_layer_nm.unwrap_or(DEFAULT_BETA_LAYER_NM),
        rho_beta: cfg.rho_beta.unwrap_or(DEFAULT_RHO_BETA),
        rho_alpha: cfg.rho_alpha.unwrap_or(DEFAULT_RHO_ALPHA),
    };
    let make = |h: f64| FilmStack {
        total_thickness_nm: h,
        beta_layer_nm: stack.beta_layer_nm,
        rho_beta: stack.rho_beta,
        rho_alpha: stack.rho_alpha,
    };
    // reject an invalid stack before any work
    if let Err(FilmsError::InvalidStack(m)) =
        composite_resistivity(&make(stack.beta_layer_nm + 1.0))
    {
        return Err(CliError::Config(m));
    }
    let mut thicknesses = cfg
        .thicknesses_nm
        .clone()
        .unwrap_or_else(|| DEFAULT_THICKNESSES_NM.to_vec());
    thicknesses.sort_by(f64::total_cmp);
    let resistivity: Vec<ResistivityRow> = thicknesses
        .iter()
        .map(|&h| {
            let rho = composite_resistivity(&make(h)).ok();
            ResistivityRow {
                h_nm: h,
                rho,
                phase: rho.map(classify_phase_by_resistivity),
                tc_k: tc_vs_thickness(h).ok(),
            }
        })
        .collect();

    let mut batch = Batch::new("films", settings.seed, &settings.out_dir);
    let files = if settings.inputs.is_empty() {
        Vec::new()
    } else {
        expand_inputs(&settings.inputs, "csv")?
    };
    let mut curves = Vec::new();
    let mut rt_chart = Chart::new(
        "Normalized resistance versus temperature",
        "temperature (K)",
        "R / R_plateau",
        Scale::Linear,
        Scale::Linear,
    );
    for path in &files {
        batch.input();
        let source = path.display().to_string();
        let curve = match read_rt_csv(path) {
            Ok(c) => c,
            Err(e) => {
                batch.fail_input(&source, e);
                continue;
            }
        };
        if let Err(e) = curve.validate() {
            batch.fail(&source, "invalid-curve", e.to_string());
            continue;
        }
        let mut notes = Vec::new();
        let tc = match extract_tc(&curve) {
            Ok(t) => Some(t),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        let ratio = match rrr(&curve) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        };
        let scale = tc.map_or_else(
            || curve.resistance.iter().cloned().fold(0.0, f64::max),
            |t| t.plateau,
        );
        if scale > 0.0 {
            let pts = curve
                .temps
                .iter()
                .zip(&curve.resistance)
                .filter(|(t, _)| **t <= PLATEAU_WINDOW_K)
                .map(|(t, r)| (*t, r / scale))
                .collect();
            rt_chart = rt_chart.with_series(Series::line(&curve.label, pts));
        }
        curves.push(CurveRow {
            source,
            label: curve.label.clone(),
            tc_k: tc.map(|t| t.tc_k),
            multiple_crossings: tc.is_some_and(|t| t.multiple_crossings),
            rrr: ratio,
            notes,
        });
        batch.success();
    }

    let table = load_substrates(settings)?;
    let phases: Vec<PhaseRow> = table
        .rows
        .iter()
        .map(|row| {
            let predicted = predict_phase(&row.substrate);
            PhaseRow {
                id: row.id.clone(),
                group: row.group.clone(),
                substrate: row.substrate.name.clone(),
                predicted,
                reported: row.reported_phase,
                resistivity: row.resistivity,
                resistivity_phase: row.resistivity.map(classify_phase_by_resistivity),
                mismatch: predicted != TaPhase::Unknown && predicted != row.reported_phase,
            }
        })
        .collect();
    let phase_mismatches = phases.iter().filter(|p| p.mismatch).count();

    let report = FilmsReport {
        stack: stack.clone(),
        resistivity,
        curves,
        substrate_table_version: table.version,
        phases,
        phase_mismatches,
    };
    batch.write_json("films.json", &report)?;

    let lo = stack.beta_layer_nm.max(1.0) * 1.1;
    let curve: Vec<(f64, f64)> = log_grid(lo, 1200.0_f64.max(lo * 10.0), 200)
        .into_iter()
        .filter_map(|h| composite_resistivity(&make(h)).ok().map(|r| (h, r)))
        .collect();
    let table_pts = report
        .resistivity
        .iter()
        .filter_map(|r| r.rho.map(|rho| (r.h_nm, rho)))
        .collect();
    let rho_chart = Chart::new(
        "Two-layer film resistivity",
        "thickness (nm)",
        "resistivity (µΩ·cm)",
        Scale::Log,
        Scale::Linear,
    )
    .with_series(Series::line("parallel layers", curve))
    .with_series(Series::markers("requested", table_pts));
    if let Ok(svg) = rho_chart.to_svg() {
        batch.write_text("films_resistivity.svg", &svg)?;
    }
    if !report.curves.is_empty() {
        if let Ok(svg) = rt_chart.to_svg() {
            batch.write_text("films_rt.svg", &svg)?;
        }
    }
    batch.finish()
}
