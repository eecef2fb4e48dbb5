use nalgebra::DVector;

use super::{
    common_flags, estimates_from, multistart, report_from, FitFlag, FitModel, FitOptions,
    FitReport, LnQModel, LossPoint, ParamSpec, ParameterEstimate, QResiduals, ResidualScale,
    SweepDataset, SweepFitError,
};
use crate::models::{reduced_frequency, PowerLawTlsParams};

/// Fitted coordinates: Q_TLS,0, n_c, β, Q_other.
pub const POWER_PARAMS: [ParamSpec; 4] = [
    ParamSpec::log("q_tls0", 1e4, 1e11),
    ParamSpec::log("n_c", 1e-2, 1e6),
    ParamSpec::linear("beta_exp", 0.05, 1.0, false),
    ParamSpec::log("q_other", 1e4, 1e11),
];

const MIN_POINTS: usize = 8;

/// ln Q of the power-law model at a fixed temperature.
pub struct PowerLawModel {
    tanh_xi: f64,
    n_ph: Vec<f64>,
}

impl LnQModel for PowerLawModel {
    fn num_params(&self) -> usize {
        4
    }

    fn ln_q(&self, theta: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let beta = theta[2];
        let u = self.n_ph[i] * (-theta[1]).exp();
        let tls = self.tanh_xi * (-theta[0]).exp() * (-beta * u.ln_1p()).exp();
        let other = (-theta[3]).exp();
        let total = tls + other;
        grad[0] = tls / total;
        grad[1] = -tls * beta * u / (1.0 + u) / total;
        grad[2] = tls * u.ln_1p() / total;
        grad[3] = other / total;
        -total.ln()
    }
}

pub type PowerSweepProblem = QResiduals<PowerLawModel>;

impl PowerSweepProblem {
    pub fn new(
        points: &[LossPoint],
        f0: f64,
        temperature: f64,
        scale: ResidualScale,
    ) -> Result<Self, SweepFitError> {
        Ok(QResiduals {
            model: PowerLawModel {
                tanh_xi: reduced_frequency(f0, temperature)?.tanh(),
                n_ph: points.iter().map(|p| p.n_ph).collect(),
            },
            q: points.iter().map(|p| p.q_i).collect(),
            sigma: points.iter().map(|p| p.sigma()).collect(),
            scale,
        })
    }

    /// Maps a physical parameter record to fit coordinates.
    pub fn internal(p: &PowerLawTlsParams) -> DVector<f64> {
        DVector::from_vec(vec![p.q_tls0.ln(), p.n_c.ln(), p.beta_exp, p.q_other.ln()])
    }
}

fn informed_start(points: &[LossPoint], tanh_xi: f64) -> [f64; 4] {
    let lowest = points
        .iter()
        .min_by(|a, b| a.n_ph.total_cmp(&b.n_ph))
        .expect("non-empty");
    let q_max = points.iter().map(|p| p.q_i).fold(0.0, f64::max);
    let q_other = 3.0 * q_max;
    let q_tls0 = tanh_xi / (1.0 / lowest.q_i - 1.0 / q_other);
    let logs: Vec<f64> = points
        .iter()
        .filter(|p| p.n_ph > 0.0)
        .map(|p| p.n_ph.log10())
        .collect();
    let n_c = if logs.is_empty() {
        1.0
    } else {
        10f64.powf(logs.iter().sum::<f64>() / logs.len() as f64)
    };
    [q_tls0, n_c, 0.5, q_other]
}

/// Fits the power-law saturation model to a sweep taken at `temperature`.
///
/// Residuals are in log space by default. Fewer than three decades of
/// photon number produce a [`FitFlag::NarrowPowerRange`] flag, not an
/// error.
pub fn fit_power_sweep(
    data: &SweepDataset,
    temperature: f64,
    options: &FitOptions,
) -> Result<FitReport<PowerLawTlsParams>, SweepFitError> {
    let points = data.loss_points()?;
    if points.len() < MIN_POINTS {
        return Err(SweepFitError::InsufficientData {
            what: "power sweep points",
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    let problem = PowerSweepProblem::new(&points, data.f0_hz, temperature, options.residuals)?;
    let informed = informed_start(&points, problem.model.tanh_xi);
    let (rep, best, starts) = multistart(&problem, &POWER_PARAMS, &informed, options)?;

    let mut estimates = estimates_from(&POWER_PARAMS, &rep);
    let q_other = estimates[3].value;
    estimates.push(ParameterEstimate {
        name: "inverse_q_other".into(),
        value: 1.0 / q_other,
        stderr: Some(rep.stderr[3] / q_other).filter(|v| v.is_finite()),
    });

    let mut flags = Vec::new();
    let positive: Vec<f64> = points.iter().map(|p| p.n_ph).filter(|n| *n > 0.0).collect();
    let decades = if positive.is_empty() {
        0.0
    } else {
        let hi = positive.iter().cloned().fold(f64::MIN, f64::max);
        let lo = positive.iter().cloned().fold(f64::MAX, f64::min);
        (hi / lo).log10()
    };
    if decades < 3.0 {
        flags.push(FitFlag::NarrowPowerRange { decades });
    }
    let spread = points
        .iter()
        .map(|p| (p.t_k / temperature - 1.0).abs())
        .fold(0.0, f64::max);
    if spread > 0.1 {
        flags.push(FitFlag::TemperatureSpread {
            max_relative_deviation: spread,
        });
    }
    flags.extend(common_flags(&POWER_PARAMS, &rep, &[]));

    let params = PowerLawTlsParams {
        q_tls0: estimates[0].value,
        n_c: estimates[1].value,
        beta_exp: estimates[2].value,
        q_other,
        temperature,
        f0: data.f0_hz,
    };
    Ok(report_from(
        &data.resonator_id,
        FitModel::PowerLaw,
        params,
        estimates,
        points.len(),
        &rep,
        best,
        starts,
        flags,
    ))
}
