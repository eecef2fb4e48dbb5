//! Notch-type S21 synthesis and circle-fit extraction of resonator
//! parameters.
//!
//! The model is
//!
//! ```text
//! S21(f) = a·e^(iα)·e^(−2πifτ)·[1 − (Q_l/|Q_c|)·e^(iφ₀) / (1 + 2iQ_l(f/f_r − 1))]
//! ```
//!
//! and [`fit_circle`] recovers all seven parameters plus Q_i from a
//! complex trace.

mod fit;
mod taubin;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HBAR;

pub use fit::{estimate_noise, fit_circle, unwrap_phase, NotchProblem};
pub use taubin::{taubin_fit, Circle};

/// Fewest points accepted in a trace.
pub const MIN_TRACE_POINTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircleFitError {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("trace does not span the resonance: {0}")]
    OffResonance(String),
    #[error("circle radius {radius:e} is below 5x the noise level {noise:e}")]
    DegenerateCircle { radius: f64, noise: f64 },
    #[error("extracted Q_i is not positive (1/Q_i = {inverse_q_i:e})")]
    NonPositiveQi { inverse_q_i: f64 },
    #[error("trace has no drive power metadata")]
    MissingPower,
}

/// A measured or synthesized complex transmission trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTrace {
    pub resonator_id: String,
    /// Hz, strictly increasing.
    pub freqs: Vec<f64>,
    pub s21: Vec<Complex64>,
    /// dBm at the chip reference plane.
    #[serde(default)]
    pub drive_power_dbm: Option<f64>,
    /// Kelvin.
    #[serde(default)]
    pub temperature_k: Option<f64>,
}

impl ComplexTrace {
    pub fn new(
        resonator_id: impl Into<String>,
        freqs: Vec<f64>,
        s21: Vec<Complex64>,
    ) -> Result<Self, CircleFitError> {
        let trace = Self {
            resonator_id: resonator_id.into(),
            freqs,
            s21,
            drive_power_dbm: None,
            temperature_k: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), CircleFitError> {
        let bad = |m: String| Err(CircleFitError::InvalidTrace(m));
        if self.freqs.len() != self.s21.len() {
            return bad(format!(
                "{} frequencies but {} S21 values",
                self.freqs.len(),
                self.s21.len()
            ));
        }
        if self.freqs.len() < MIN_TRACE_POINTS {
            return bad(format!(
                "{} points, need at least {MIN_TRACE_POINTS}",
                self.freqs.len()
            ));
        }
        if self.freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return bad("frequencies must be positive and finite".into());
        }
        if self.freqs.windows(2).any(|w| w[1] <= w[0]) {
            return bad("frequencies must be strictly increasing".into());
        }
        if self
            .s21
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return bad("S21 contains non-finite values".into());
        }
        Ok(())
    }
}

/// Parameters of the notch-type resonator model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchModelParams {
    /// Hz.
    pub f_res: f64,
    pub q_l: f64,
    pub q_c_mag: f64,
    /// Impedance-mismatch rotation, radians.
    pub phi0: f64,
    pub amp: f64,
    /// Radians.
    pub alpha_env: f64,
    /// Cable delay, seconds.
    pub tau: f64,
}

impl NotchModelParams {
    /// Builds a parameter set from Q_i and |Q_c| via
    /// 1/Q_l = 1/Q_i + cos φ₀/|Q_c|.
    pub fn from_qi(
        f_res: f64,
        q_i: f64,
        q_c_mag: f64,
        phi0: f64,
        amp: f64,
        alpha_env: f64,
        tau: f64,
    ) -> Self {
        Self {
            f_res,
            q_l: 1.0 / (1.0 / q_i + phi0.cos() / q_c_mag),
            q_c_mag,
            phi0,
            amp,
            alpha_env,
            tau,
        }
    }

    pub fn inverse_q_i(&self) -> f64 {
        1.0 / self.q_l - self.phi0.cos() / self.q_c_mag
    }

    pub fn q_i(&self) -> f64 {
        1.0 / self.inverse_q_i()
    }

    pub fn validate(&self) -> Result<(), CircleFitError> {
        let finite = [
            self.f_res,
            self.q_l,
            self.q_c_mag,
            self.phi0,
            self.amp,
            self.alpha_env,
            self.tau,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(CircleFitError::InvalidParams("non-finite value".into()));
        }
        if !(self.f_res > 0.0 && self.q_l > 0.0 && self.q_c_mag > 0.0 && self.amp > 0.0) {
            return Err(CircleFitError::InvalidParams(
                "f_res, q_l, q_c_mag and amp must be positive".into(),
            ));
        }
        if !(self.inverse_q_i() > 0.0) {
            return Err(CircleFitError::InvalidParams(format!(
                "implied Q_i is not positive (1/Q_i = {:e})",
                self.inverse_q_i()
            )));
        }
        Ok(())
    }

    /// Model S21 at frequency `f`.
    pub fn s21(&self, f: f64) -> Complex64 {
        let env = Complex64::from_polar(self.amp, self.alpha_env - 2.0 * PI * f * self.tau);
        let detuning = Complex64::new(1.0, 2.0 * self.q_l * (f / self.f_res - 1.0));
        let coupling = Complex64::from_polar(self.q_l / self.q_c_mag, self.phi0);
        env * (1.0 - coupling / detuning)
    }

    /// Loaded linewidth f_res/Q_l, Hz.
    pub fn linewidth(&self) -> f64 {
        self.f_res / self.q_l
    }
}

/// Per-parameter one-sigma uncertainties; `None` where unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchStderr {
    pub f_res: Option<f64>,
    pub q_l: Option<f64>,
    pub q_c_mag: Option<f64>,
    pub phi0: Option<f64>,
    pub amp: Option<f64>,
    pub alpha_env: Option<f64>,
    pub tau: Option<f64>,
    pub q_i: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleFitResult {
    pub resonator_id: String,
    pub params: NotchModelParams,
    pub q_i: f64,
    pub stderr: NotchStderr,
    /// RMS of |S21_data − S21_model|.
    pub rms_residual: f64,
    /// Per-quadrature noise estimated from second differences.
    pub noise_sigma: f64,
    /// Fitted circle radius over the noise level.
    pub snr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Carried over from the trace.
    pub drive_power_dbm: Option<f64>,
    pub temperature_k: Option<f64>,
}

/// Evaluates the model on `freqs` and adds complex Gaussian noise of
/// standard deviation `noise_sigma` per quadrature.
pub fn synth_s21(
    params: &NotchModelParams,
    freqs: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<ComplexTrace, CircleFitError> {
    if freqs.is_empty() {
        return Err(CircleFitError::InvalidTrace("empty frequency grid".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(CircleFitError::InvalidParams(format!(
            "noise_sigma = {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s21 = freqs
        .iter()
        .map(|&f| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            params.s21(f) + noise_sigma * Complex64::new(re, im)
        })
        .collect();
    Ok(ComplexTrace {
        resonator_id: String::new(),
        freqs: freqs.to_vec(),
        s21,
        drive_power_dbm: None,
        temperature_k: None,
    })
}

/// Evenly spaced grid of `count` points covering f_res ± `half_widths`
/// loaded linewidths.
pub fn linewidth_grid(params: &NotchModelParams, half_widths: f64, count: usize) -> Vec<f64> {
    let half = half_widths * params.linewidth();
    let step = 2.0 * half / (count.max(2) - 1) as f64;
    (0..count)
        .map(|k| params.f_res - half + step * k as f64)
        .collect()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Mean photon number ⟨n⟩ = 2Q_l²/(|Q_c|·ħω²)·P_chip.
///
/// `applied_power_dbm` is the power at the line input; the chip sees it
/// reduced by `line_attenuation_db`. Uses the result's own drive power when
/// `applied_power_dbm` is `None`.
pub fn photons_in_resonator(
    result: &CircleFitResult,
    applied_power_dbm: Option<f64>,
    line_attenuation_db: f64,
) -> Result<f64, CircleFitError> {
    let dbm = applied_power_dbm
        .or(result.drive_power_dbm)
        .ok_or(CircleFitError::MissingPower)?;
    let p = &result.params;
    if !(p.f_res > 0.0) {
        return Err(CircleFitError::InvalidParams(format!(
            "f_res = {}",
            p.f_res
        )));
    }
    let omega = 2.0 * PI * p.f_res;
    let p_chip = dbm_to_watts(dbm - line_attenuation_db);
    Ok(2.0 * p.q_l * p.q_l / (p.q_c_mag * HBAR * omega * omega) * p_chip)
}
