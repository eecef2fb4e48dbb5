//! Least-squares fitting of loss and frequency-shift sweeps.
//!
//! Three campaigns share one bounded Levenberg–Marquardt engine ([`lm`]):
//!
//! * [`fit_power_sweep`]: power-law TLS saturation at fixed temperature,
//! * [`fit_qint_vs_t`]: the six-parameter loss model over power and
//!   temperature, with multi-start,
//! * [`fit_freq_shift`]: TLS plus kinetic-inductance frequency shift.
//!
//! Q-type parameters are fitted as logarithms and Q residuals are taken in
//! log space by default, since Q values span several decades.

mod compare;
mod dataset;
mod joint;
pub mod lm;
mod power;
mod shift;
pub mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ModelError;
use lm::{lm_minimize, Bounds, LeastSquaresProblem, LmError, LmOptions, LmReport, Termination};

pub use compare::{compare_tls_estimates, TlsComparison, TlsEstimate, INCONSISTENCY_RATIO};
pub use dataset::{
    time_average, LossPoint, ShiftPoint, SweepDataset, SweepPoint, TimedLossSample,
    DEFAULT_RELATIVE_SIGMA,
};
pub use joint::{fit_qint_vs_t, JointLossModel, JointLossProblem, JOINT_PARAMS};
pub use power::{fit_power_sweep, PowerLawModel, PowerSweepProblem, POWER_PARAMS};
pub use shift::{fit_freq_shift, ShiftProblem, SHIFT_PARAMS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepFitError {
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("{what}: need at least {needed}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optimizer(#[from] LmError),
}

/// How Q residuals are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualScale {
    /// (ln Q_model − ln Q_data) / (σ/Q_data)
    #[default]
    Log,
    /// (Q_model − Q_data) / σ
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Seed for the random multi-start points.
    pub seed: u64,
    /// Random starts in addition to the data-informed one.
    pub random_starts: usize,
    pub residuals: ResidualScale,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            random_starts: 8,
            residuals: ResidualScale::Log,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    PowerLaw,
    LossVsTemperature,
    FrequencyShift,
}

/// Conditions worth a reader's attention that do not make the fit fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitFlag {
    /// The photon-number sweep spans fewer than three decades.
    NarrowPowerRange {
        decades: f64,
    },
    /// Points deviate from the nominal fit temperature.
    TemperatureSpread {
        max_relative_deviation: f64,
    },
    /// The data show no quasiparticle falloff; Q_QP,0 is only bounded below.
    QpUnconstrained {
        q_qp0_lower_bound: f64,
    },
    /// D and β₂ enter only through β₂/D; only the ratio is determined.
    SaturationDegenerate,
    /// Relative uncertainty above 100 % or unbounded.
    Unconstrained {
        parameter: String,
    },
    AtBound {
        parameter: String,
    },
    NotConverged,
}

/// A fitted or derived quantity in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub value: f64,
    /// One-sigma uncertainty; `None` when the data do not constrain it.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<P> {
    pub resonator_id: String,
    pub model: FitModel,
    pub params: P,
    pub estimates: Vec<ParameterEstimate>,
    pub n_points: usize,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub condition_number: f64,
    pub starts: usize,
    pub best_start: usize,
    pub flags: Vec<FitFlag>,
}

impl<P> FitReport<P> {
    pub fn estimate(&self, name: &str) -> Option<&ParameterEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn has_flag(&self, pred: impl Fn(&FitFlag) -> bool) -> bool {
        self.flags.iter().any(pred)
    }
}

/// A fitted coordinate. Log parameters are optimized as ln(value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub log: bool,
    pub lower: f64,
    pub upper: f64,
    /// Draw random starts log-uniformly even for a linear coordinate.
    pub sample_log: bool,
}

impl ParamSpec {
    const fn log(name: &'static str, lower: f64, upper: f64) -> Self {
        Self {
            name,
            log: true,
            lower,
            upper,
            sample_log: true,
        }
    }

    const fn linear(name: &'static str, lower: f64, upper: f64, sample_log: bool) -> Self {
        Self {
            name,
            log: false,
            lower,
            upper,
            sample_log,
        }
    }

    fn to_internal(&self, value: f64) -> f64 {
        let v = value.clamp(self.lower, self.upper);
        if self.log {
            v.ln()
        } else {
            v
        }
    }

    fn to_physical(&self, x: f64) -> f64 {
        if self.log {
            x.exp()
        } else {
            x
        }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        (self.to_internal(self.lower), self.to_internal(self.upper))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.gen();
        if self.sample_log {
            let v = (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp();
            self.to_internal(v)
        } else {
            self.to_internal(self.lower + u * (self.upper - self.lower))
        }
    }
}

fn internal_bounds(specs: &[ParamSpec]) -> Bounds {
    let (lower, upper) = specs.iter().map(|s| s.internal_bounds()).unzip();
    Bounds::new(lower, upper)
}

/// Runs LM from the informed start and `random_starts` seeded random
/// starts and keeps the lowest cost (ties go to the earlier start).
fn multistart<P: LeastSquaresProblem>(
    problem: &P,
    specs: &[ParamSpec],
    informed: &[f64],
    options: &FitOptions,
) -> Result<(LmReport, usize, usize), SweepFitError> {
    let bounds = internal_bounds(specs);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![specs
        .iter()
        .zip(informed)
        .map(|(s, v)| s.to_internal(*v))
        .collect::<Vec<_>>()];
    for _ in 0..options.random_starts {
        starts.push(specs.iter().map(|s| s.sample(&mut rng)).collect());
    }
    let mut best: Option<(LmReport, usize)> = None;
    let mut first_err = None;
    for (i, x0) in starts.iter().enumerate() {
        match lm_minimize(problem, x0, &bounds, &options.lm) {
            Ok(rep) => {
                if best.as_ref().map_or(true, |(b, _)| rep.cost < b.cost) {
                    best = Some((rep, i));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((rep, i)) => Ok((rep, i, starts.len())),
        None => Err(first_err.expect("at least one start").into()),
    }
}

/// Physical-unit estimates for the fitted coordinates.
fn estimates_from(specs: &[ParamSpec], rep: &LmReport) -> Vec<ParameterEstimate> {
    specs
        .iter()
        .zip(rep.params.iter().zip(&rep.stderr))
        .map(|(s, (x, se))| {
            let value = s.to_physical(*x);
            let stderr = if s.log { value * se } else { *se };
            ParameterEstimate {
                name: s.name.to_string(),
                value,
                stderr: Some(stderr).filter(|v| v.is_finite()),
            }
        })
        .collect()
}

/// Flags shared by all campaigns: bounds, convergence, weak constraints.
fn common_flags(specs: &[ParamSpec], rep: &LmReport, skip: &[&str]) -> Vec<FitFlag> {
    let mut flags = Vec::new();
    if !rep.converged {
        flags.push(FitFlag::NotConverged);
    }
    for (s, (x, se)) in specs.iter().zip(rep.params.iter().zip(&rep.stderr)) {
        let (lo, hi) = s.internal_bounds();
        let tol = 1e-9 * (hi - lo).abs().max(1.0);
        if (*x - lo).abs() <= tol || (*x - hi).abs() <= tol {
            flags.push(FitFlag::AtBound {
                parameter: s.name.to_string(),
            });
        }
        if skip.contains(&s.name) {
            continue;
        }
        let relative = if s.log { *se } else { se / x.abs() };
        if !(relative <= 1.0) {
            flags.push(FitFlag::Unconstrained {
                parameter: s.name.to_string(),
            });
        }
    }
    flags
}

fn report_from<P>(
    resonator_id: &str,
    model: FitModel,
    params: P,
    estimates: Vec<ParameterEstimate>,
    n_points: usize,
    rep: &LmReport,
    best_start: usize,
    starts: usize,
    flags: Vec<FitFlag>,
) -> FitReport<P> {
    FitReport {
        resonator_id: resonator_id.to_string(),
        model,
        params,
        estimates,
        n_points,
        chi_square: rep.chi_square,
        reduced_chi_square: rep.reduced_chi_square,
        iterations: rep.iterations,
        converged: rep.converged,
        termination: rep.termination,
        condition_number: rep.condition_number,
        starts,
        best_start,
        flags,
    }
}

/// Residuals and Jacobian rows for a model of ln Q.
///
/// `ln_q` writes ∂ln Q/∂θ into `grad` and returns ln Q_model for point `i`.
pub trait LnQModel {
    fn num_params(&self) -> usize;
    fn ln_q(&self, theta: &[f64], i: usize, grad: &mut [f64]) -> f64;
}

/// Shared residual plumbing for the two Q models.
pub struct QResiduals<M> {
    pub model: M,
    pub q: Vec<f64>,
    pub sigma: Vec<f64>,
    pub scale: ResidualScale,
}

impl<M: LnQModel> QResiduals<M> {
    fn eval(
        &self,
        x: &nalgebra::DVector<f64>,
        mut jac: Option<&mut nalgebra::DMatrix<f64>>,
    ) -> Option<nalgebra::DVector<f64>> {
        let n = self.model.num_params();
        let mut grad = vec![0.0; n];
        let mut r = nalgebra::DVector::zeros(self.q.len());
        for i in 0..self.q.len() {
            let lnq = self.model.ln_q(x.as_slice(), i, &mut grad);
            if !lnq.is_finite() {
                return None;
            }
            let (ri, factor) = match self.scale {
                ResidualScale::Log => {
                    let s = self.sigma[i] / self.q[i];
                    ((lnq - self.q[i].ln()) / s, 1.0 / s)
                }
                ResidualScale::Linear => {
                    let qm = lnq.exp();
                    ((qm - self.q[i]) / self.sigma[i], qm / self.sigma[i])
                }
            };
            r[i] = ri;
            if let Some(j) = jac.as_deref_mut() {
                for k in 0..n {
                    j[(i, k)] = factor * grad[k];
                }
            }
        }
        Some(r)
    }
}

impl<M: LnQModel> LeastSquaresProblem for QResiduals<M> {
    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    fn residuals(&self, x: &nalgebra::DVector<f64>) -> Option<nalgebra::DVector<f64>> {
        self.eval(x, None)
    }

    fn jacobian(&self, x: &nalgebra::DVector<f64>) -> Option<nalgebra::DMatrix<f64>> {
        let mut j = nalgebra::DMatrix::zeros(self.q.len(), self.model.num_params());
        self.eval(x, Some(&mut j))?;
        Some(j)
    }
}
