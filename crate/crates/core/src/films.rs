//! Thin tantalum film calculators: two-layer resistivity, R(T) analysis,
//! Tc versus thickness and substrate phase classification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilmsError {
    #[error("invalid film stack: {0}")]
    InvalidStack(String),
    #[error("invalid R(T) curve: {0}")]
    InvalidCurve(String),
    #[error("no superconducting transition: min/max resistance ratio {ratio:.3} is above 0.1")]
    NoTransition { ratio: f64 },
    #[error("no room-temperature point: highest temperature is {max_t_k} K")]
    MissingRoomTemperature { max_t_k: f64 },
    #[error("thickness {h_nm} nm is outside the calibrated range {lo}..={hi} nm")]
    OutOfRange { h_nm: f64, lo: f64, hi: f64 },
    #[error("invalid substrate fixture: {0}")]
    Fixture(String),
}

/// Default thickness of the β-phase underlayer, nm.
pub const DEFAULT_BETA_LAYER_NM: f64 = 10.0;

/// An α-Ta film grown on a thin β-Ta underlayer. Resistivities in µΩ·cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmStack {
    pub total_thickness_nm: f64,
    #[serde(default = "default_beta_layer")]
    pub beta_layer_nm: f64,
    pub rho_beta: f64,
    pub rho_alpha: f64,
}

fn default_beta_layer() -> f64 {
    DEFAULT_BETA_LAYER_NM
}

impl FilmStack {
    pub fn new(total_thickness_nm: f64, rho_beta: f64, rho_alpha: f64) -> Self {
        Self {
            total_thickness_nm,
            beta_layer_nm: DEFAULT_BETA_LAYER_NM,
            rho_beta,
            rho_alpha,
        }
    }

    pub fn validate(&self) -> Result<(), FilmsError> {
        let fail = |m: String| Err(FilmsError::InvalidStack(m));
        if !(self.beta_layer_nm >= 0.0) || !self.beta_layer_nm.is_finite() {
            return fail(format!("beta layer {} nm", self.beta_layer_nm));
        }
        if !(self.total_thickness_nm > self.beta_layer_nm) || !self.total_thickness_nm.is_finite() {
            return fail(format!(
                "total thickness {} nm must exceed the beta layer {} nm",
                self.total_thickness_nm, self.beta_layer_nm
            ));
        }
        if !(self.rho_alpha > 0.0 && self.rho_beta > self.rho_alpha) || !self.rho_beta.is_finite() {
            return fail(format!(
                "need rho_beta > rho_alpha > 0, got {} and {}",
                self.rho_beta, self.rho_alpha
            ));
        }
        Ok(())
    }
}

/// Effective resistivity of the stack treating the two layers as parallel
/// conductors: h / (t_β/ρ_β + (h − t_β)/ρ_α).
pub fn composite_resistivity(stack: &FilmStack) -> Result<f64, FilmsError> {
    stack.validate()?;
    let h = stack.total_thickness_nm;
    let t = stack.beta_layer_nm;
    Ok(h / (t / stack.rho_beta + (h - t) / stack.rho_alpha))
}

/// Resistance versus temperature. Resistance may be in ohms or normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtCurve {
    pub label: String,
    pub temps: Vec<f64>,
    pub resistance: Vec<f64>,
}

pub const MIN_CURVE_POINTS: usize = 10;

/// Only points at or below this temperature define the normal-state
/// plateau used for Tc, so room-temperature tails do not set the scale.
pub const PLATEAU_WINDOW_K: f64 = 20.0;

impl RtCurve {
    pub fn validate(&self) -> Result<(), FilmsError> {
        let fail = |m: String| Err(FilmsError::InvalidCurve(m));
        if self.temps.len() != self.resistance.len() {
            return fail(format!(
                "{} temperatures but {} resistances",
                self.temps.len(),
                self.resistance.len()
            ));
        }
        if self.temps.len() < MIN_CURVE_POINTS {
            return fail(format!(
                "{} points, need at least {MIN_CURVE_POINTS}",
                self.temps.len()
            ));
        }
        if self
            .temps
            .iter()
            .chain(&self.resistance)
            .any(|v| !v.is_finite())
        {
            return fail("non-finite value".into());
        }
        if self.temps.windows(2).any(|w| w[1] <= w[0]) {
            return fail("temperatures must be strictly increasing".into());
        }
        if self.temps[0] <= 0.0 || self.resistance.iter().any(|&r| r < 0.0) {
            return fail("temperatures must be positive and resistances non-negative".into());
        }
        Ok(())
    }

    /// Linear interpolation of R at `t`, or `None` outside the sampled range.
    pub fn resistance_at(&self, t: f64) -> Option<f64> {
        let k = self.temps.partition_point(|&x| x < t);
        if k == 0 {
            return (self.temps[0] == t).then(|| self.resistance[0]);
        }
        if k == self.temps.len() {
            return None;
        }
        let (t0, t1) = (self.temps[k - 1], self.temps[k]);
        let (r0, r1) = (self.resistance[k - 1], self.resistance[k]);
        Some(r0 + (r1 - r0) * (t - t0) / (t1 - t0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcExtraction {
    pub tc_k: f64,
    /// Normal-state plateau resistance the midpoint refers to.
    pub plateau: f64,
    /// Number of 50 % crossings found; more than one means a noisy curve,
    /// in which case the highest-temperature crossing is reported.
    pub crossings: usize,
    pub multiple_crossings: bool,
}

/// Tc as the temperature where R crosses half of the normal-state plateau.
///
/// The plateau is the median of the top temperature decile of the points
/// at or below [`PLATEAU_WINDOW_K`] (all points if none are above it). The
/// crossing is linearly interpolated between the bracketing samples.
pub fn extract_tc(curve: &RtCurve) -> Result<TcExtraction, FilmsError> {
    curve.validate()?;
    let window = curve.temps.partition_point(|&t| t <= PLATEAU_WINDOW_K);
    let window = if window < MIN_CURVE_POINTS {
        curve.temps.len()
    } else {
        window
    };
    let temps = &curve.temps[..window];
    let r = &curve.resistance[..window];
    let decile = window.div_ceil(10);
    let plateau = median(&r[window - decile..]);
    let r_min = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = r.iter().cloned().fold(0.0, f64::max);
    let ratio = if r_max > 0.0 { r_min / r_max } else { 1.0 };
    if !(ratio < 0.1) || !(plateau > 0.0) {
        return Err(FilmsError::NoTransition { ratio });
    }
    let half = 0.5 * plateau;
    let mut crossings = Vec::new();
    for k in 0..window - 1 {
        let (a, b) = (r[k] - half, r[k + 1] - half);
        if a == 0.0 {
            crossings.push(temps[k]);
        } else if a * b < 0.0 {
            crossings.push(temps[k] + (temps[k + 1] - temps[k]) * a / (a - b));
        }
    }
    let tc_k = *crossings.last().ok_or(FilmsError::NoTransition { ratio })?;
    Ok(TcExtraction {
        tc_k,
        plateau,
        crossings: crossings.len(),
        multiple_crossings: crossings.len() > 1,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Room temperature for the residual resistance ratio, K.
pub const ROOM_TEMPERATURE_K: f64 = 300.0;
/// How far the highest sample may fall short of room temperature, K.
pub const ROOM_TEMPERATURE_SLACK_K: f64 = 5.0;
/// Offset above Tc at which the residual resistance is read, K.
pub const RESIDUAL_OFFSET_K: f64 = 0.5;

/// Residual resistance ratio R(300 K)/R(Tc + 0.5 K).
///
/// Without a detectable transition the lowest-temperature point is used
/// as the residual resistance.
pub fn rrr(curve: &RtCurve) -> Result<f64, FilmsError> {
    curve.validate()?;
    let n = curve.temps.len();
    let t_max = curve.temps[n - 1];
    let r_room = if t_max >= ROOM_TEMPERATURE_K {
        curve.resistance_at(ROOM_TEMPERATURE_K).expect("bracketed")
    } else if t_max >= ROOM_TEMPERATURE_K - ROOM_TEMPERATURE_SLACK_K {
        curve.resistance[n - 1]
    } else {
        return Err(FilmsError::MissingRoomTemperature { max_t_k: t_max });
    };
    let r_residual = match extract_tc(curve) {
        Ok(tc) => curve
            .resistance_at(tc.tc_k + RESIDUAL_OFFSET_K)
            .ok_or_else(|| FilmsError::InvalidCurve("no samples above Tc".into()))?,
        Err(FilmsError::NoTransition { .. }) => curve.resistance[0],
        Err(e) => return Err(e),
    };
    if !(r_residual > 0.0) {
        return Err(FilmsError::InvalidCurve("zero residual resistance".into()));
    }
    Ok(r_room / r_residual)
}

/// Measured (thickness nm, Tc K) anchors of α-Ta films on a 10 nm β layer.
pub const TC_THICKNESS_ANCHORS: [(f64, f64); 5] = [
    (20.0, 3.77),
    (30.0, 4.06),
    (60.0, 4.27),
    (100.0, 4.31),
    (150.0, 4.39),
];

/// Tc of a film of total thickness `h_nm`, piecewise linear between the
/// measured anchors. No extrapolation.
pub fn tc_vs_thickness(h_nm: f64) -> Result<f64, FilmsError> {
    let (lo, hi) = (TC_THICKNESS_ANCHORS[0].0, TC_THICKNESS_ANCHORS[4].0);
    if !(lo..=hi).contains(&h_nm) {
        return Err(FilmsError::OutOfRange { h_nm, lo, hi });
    }
    let k = TC_THICKNESS_ANCHORS
        .windows(2)
        .position(|w| h_nm <= w[1].0)
        .expect("in range");
    let ((h0, t0), (h1, t1)) = (TC_THICKNESS_ANCHORS[k], TC_THICKNESS_ANCHORS[k + 1]);
    Ok(t0 + (t1 - t0) * (h_nm - h0) / (h1 - h0))
}

/// Synthetic R(T): a normal-state curve R₀·(1 + (rrr − 1)·(T/300)³)
/// multiplied by a tanh transition of half-width `width_k` at `tc_k`.
/// `tc_k = None` gives a film that stays normal.
pub fn synth_rt_curve(
    label: &str,
    tc_k: Option<f64>,
    width_k: f64,
    rrr: f64,
    temps: &[f64],
) -> RtCurve {
    let resistance = temps
        .iter()
        .map(|&t| {
            let normal = 1.0 + (rrr - 1.0) * (t / ROOM_TEMPERATURE_K).powi(3);
            let sc = tc_k.map_or(1.0, |tc| 0.5 * (1.0 + ((t - tc) / width_k).tanh()));
            normal * sc
        })
        .collect();
    RtCurve {
        label: label.into(),
        temps: temps.to_vec(),
        resistance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceCondition {
    Bare,
    NativeOxide,
    InSituMetal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaPhase {
    Alpha,
    Beta,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistivityPhase {
    Alpha,
    Beta,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateRecord {
    pub name: String,
    /// Debye temperature of the growth surface, K.
    pub debye_temperature: f64,
    pub surface_condition: SurfaceCondition,
    /// Substrate temperature during deposition, °C.
    pub heated_to: Option<f64>,
    /// False for surfaces whose room-temperature phase has never been
    /// measured; the Debye rules then return unknown.
    #[serde(default = "yes", skip_serializing_if = "Clone::clone")]
    pub characterized: bool,
}

fn yes() -> bool {
    true
}

/// Debye temperature separating β-growing from α-growing surfaces, K.
/// Empirical: the midpoint of the empty gap between 450 K and 500 K.
pub const DEBYE_THRESHOLD_K: f64 = 475.0;
pub const SILICON_ALPHA_HEAT_C: f64 = 450.0;
pub const SAPPHIRE_ALPHA_HEAT_C: f64 = 400.0;
pub const DEFAULT_ALPHA_HEAT_C: f64 = 450.0;

impl SubstrateRecord {
    /// Deposition temperature above which α-Ta grows. Sharp thresholds;
    /// the measurements only pin them to within about ±25 °C.
    pub fn alpha_heat_threshold_c(&self) -> f64 {
        let name = self.name.to_ascii_lowercase();
        if name.contains("sapphire") || name.contains("al2o3") {
            SAPPHIRE_ALPHA_HEAT_C
        } else if name.starts_with("si") || name.contains("silicon") {
            SILICON_ALPHA_HEAT_C
        } else {
            DEFAULT_ALPHA_HEAT_C
        }
    }
}

/// Phase expected for a Ta film deposited on `substrate`.
///
/// Heating past the substrate threshold gives α. Otherwise a bare or
/// oxidized surface with θ_D ≥ 475 K gives β, a freshly deposited metal
/// with θ_D ≤ 475 K gives α, and anything else is unknown.
pub fn predict_phase(substrate: &SubstrateRecord) -> TaPhase {
    if substrate
        .heated_to
        .is_some_and(|t| t >= substrate.alpha_heat_threshold_c())
    {
        return TaPhase::Alpha;
    }
    if !substrate.characterized {
        return TaPhase::Unknown;
    }
    let theta = substrate.debye_temperature;
    match substrate.surface_condition {
        SurfaceCondition::Bare | SurfaceCondition::NativeOxide if theta >= DEBYE_THRESHOLD_K => {
            TaPhase::Beta
        }
        SurfaceCondition::InSituMetal if theta <= DEBYE_THRESHOLD_K => TaPhase::Alpha,
        _ => TaPhase::Unknown,
    }
}

pub const ALPHA_MAX_RESISTIVITY: f64 = 25.0;
pub const BETA_MIN_RESISTIVITY: f64 = 140.0;

/// Phase from room-temperature resistivity in µΩ·cm.
pub fn classify_phase_by_resistivity(rho: f64) -> ResistivityPhase {
    if rho <= ALPHA_MAX_RESISTIVITY {
        ResistivityPhase::Alpha
    } else if rho >= BETA_MIN_RESISTIVITY {
        ResistivityPhase::Beta
    } else {
        ResistivityPhase::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateFixtureRow {
    pub id: String,
    pub group: String,
    pub substrate: SubstrateRecord,
    pub reported_phase: TaPhase,
    /// Room-temperature film resistivity, µΩ·cm, where measured.
    pub resistivity: Option<f64>,
    pub theta_refs: Vec<String>,
    pub phase_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateFixture {
    pub version: u32,
    pub description: String,
    pub rows: Vec<SubstrateFixtureRow>,
}

pub const SUBSTRATE_FIXTURE_VERSION: u32 = 1;
const SUBSTRATE_FIXTURE_JSON: &str = include_str!("../resources/substrates.json");

/// The shipped table of substrates and observed Ta phases.
pub fn substrate_fixture() -> Result<SubstrateFixture, FilmsError> {
    let fixture: SubstrateFixture = serde_json::from_str(SUBSTRATE_FIXTURE_JSON)
        .map_err(|e| FilmsError::Fixture(e.to_string()))?;
    if fixture.version != SUBSTRATE_FIXTURE_VERSION {
        return Err(FilmsError::Fixture(format!(
            "version {} (expected {SUBSTRATE_FIXTURE_VERSION})",
            fixture.version
        )));
    }
    Ok(fixture)
}
