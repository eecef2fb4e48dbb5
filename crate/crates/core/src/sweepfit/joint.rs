use nalgebra::DVector;

use super::{
    common_flags, estimates_from, multistart, report_from, FitFlag, FitModel, FitOptions,
    FitReport, LnQModel, LossPoint, ParamSpec, ParameterEstimate, QResiduals, ResidualScale,
    SweepDataset, SweepFitError,
};
use crate::constants::BOLTZMANN;
use crate::models::{gap0, reduced_frequency, LossModelParams};
use crate::specfun;

/// Fitted coordinates: Q_TLS,0, D, β₁, β₂, Q_QP,0, Q_other.
///
/// β₁ is fitted linearly but sampled log-uniformly for the random starts.
pub const JOINT_PARAMS: [ParamSpec; 6] = [
    ParamSpec::log("q_tls0", 1e4, 1e11),
    ParamSpec::log("d_sat", 1e-2, 1e4),
    ParamSpec::linear("beta1", 0.05, 40.0, true),
    ParamSpec::log("beta2", 1e-2, 1e3),
    ParamSpec::log("q_qp0", 1e4, 1e11),
    ParamSpec::log("q_other", 1e4, 1e11),
];

const MIN_POINTS: usize = 12;
const MIN_TEMPERATURES: usize = 3;

/// Per-point constants of the joint loss model.
pub struct JointLossModel {
    tanh_xi: Vec<f64>,
    /// ln(n_ph · tanh ξ), or −∞ at zero photon number.
    ln_drive: Vec<f64>,
    ln_t: Vec<f64>,
    /// Δ₀/k_BT − ln(sinh ξ · K₀(ξ)), so that ln Q_QP = ln Q_QP,0 + this.
    qp_exponent: Vec<f64>,
}

impl LnQModel for JointLossModel {
    fn num_params(&self) -> usize {
        6
    }

    fn ln_q(&self, theta: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let th = self.tanh_xi[i];
        let s = (self.ln_drive[i] + theta[3] - theta[1] - theta[2] * self.ln_t[i]).exp();
        let tls = th * (-theta[0]).exp() / (1.0 + s).sqrt();
        let qp = (-(theta[4] + self.qp_exponent[i])).exp();
        let other = (-theta[5]).exp();
        let total = tls + qp + other;
        let half_sat = 0.5 * tls * s / (1.0 + s) / total;
        grad[0] = tls / total;
        grad[1] = -half_sat;
        grad[2] = -half_sat * self.ln_t[i];
        grad[3] = half_sat;
        grad[4] = qp / total;
        grad[5] = other / total;
        -total.ln()
    }
}

pub type JointLossProblem = QResiduals<JointLossModel>;

impl JointLossProblem {
    pub fn new(
        points: &[LossPoint],
        f0: f64,
        tc: f64,
        scale: ResidualScale,
    ) -> Result<Self, SweepFitError> {
        let gap = gap0(tc)?;
        let mut model = JointLossModel {
            tanh_xi: Vec::with_capacity(points.len()),
            ln_drive: Vec::with_capacity(points.len()),
            ln_t: Vec::with_capacity(points.len()),
            qp_exponent: Vec::with_capacity(points.len()),
        };
        for p in points {
            let xi = reduced_frequency(f0, p.t_k)?;
            let th = xi.tanh();
            let ln_sinh_k0 = (-0.5 * (-2.0 * xi).exp_m1()).ln()
                + specfun::bessel_k0e(xi)
                    .map_err(crate::models::ModelError::from)?
                    .ln();
            model.tanh_xi.push(th);
            model.ln_drive.push((p.n_ph * th).ln());
            model.ln_t.push(p.t_k.ln());
            model
                .qp_exponent
                .push(gap / (BOLTZMANN * p.t_k) - ln_sinh_k0);
        }
        Ok(QResiduals {
            model,
            q: points.iter().map(|p| p.q_i).collect(),
            sigma: points.iter().map(|p| p.sigma()).collect(),
            scale,
        })
    }

    /// Maps a physical parameter record to fit coordinates.
    pub fn internal(p: &LossModelParams) -> DVector<f64> {
        DVector::from_vec(vec![
            p.q_tls0.ln(),
            p.d_sat.ln(),
            p.beta1,
            p.beta2.ln(),
            p.q_qp0.ln(),
            p.q_other.ln(),
        ])
    }

    /// Smallest Q_QP,0 whose loss stays within one sigma at every point.
    fn qp_lower_bound(&self) -> f64 {
        self.q
            .iter()
            .zip(&self.sigma)
            .zip(&self.model.qp_exponent)
            .map(|((q, s), g)| -g + q.ln() - (s / q).ln())
            .fold(f64::NEG_INFINITY, f64::max)
            .exp()
    }
}

fn informed_start(problem: &JointLossProblem) -> [f64; 6] {
    let q_max = problem.q.iter().cloned().fold(0.0, f64::max);
    let q_tls0 = problem
        .q
        .iter()
        .zip(&problem.model.tanh_xi)
        .map(|(q, th)| q * th)
        .fold(f64::INFINITY, f64::min);
    [q_tls0, 10.0, 1.0, 10.0, 1e8, 3.0 * q_max]
}

/// Joint fit of the six-parameter loss model over power and temperature.
///
/// Runs the data-informed start plus `options.random_starts` seeded
/// log-uniform starts and keeps the lowest cost. D and β₂ appear only as
/// β₂/D, so they are reported individually as unconstrained together with
/// the well-determined ratio `beta2_over_d`. When the data show no
/// quasiparticle falloff, Q_QP,0 is flagged with a lower bound.
pub fn fit_qint_vs_t(
    data: &SweepDataset,
    options: &FitOptions,
) -> Result<FitReport<LossModelParams>, SweepFitError> {
    let points = data.loss_points()?;
    if points.len() < MIN_POINTS {
        return Err(SweepFitError::InsufficientData {
            what: "loss points",
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    let mut temps: Vec<u64> = points.iter().map(|p| p.t_k.to_bits()).collect();
    temps.sort_unstable();
    temps.dedup();
    if temps.len() < MIN_TEMPERATURES {
        return Err(SweepFitError::InsufficientData {
            what: "distinct temperatures",
            needed: MIN_TEMPERATURES,
            got: temps.len(),
        });
    }
    let problem = JointLossProblem::new(&points, data.f0_hz, data.tc_k, options.residuals)?;
    let informed = informed_start(&problem);
    let (rep, best, starts) = multistart(&problem, &JOINT_PARAMS, &informed, options)?;

    let mut estimates = estimates_from(&JOINT_PARAMS, &rep);
    let ratio = (rep.params[3] - rep.params[1]).exp();
    let ratio_var = rep.covariance.as_ref().map_or(f64::INFINITY, |c| {
        c.variance_of(&[0.0, -1.0, 0.0, 1.0, 0.0, 0.0])
    });
    estimates.push(ParameterEstimate {
        name: "beta2_over_d".into(),
        value: ratio,
        stderr: Some(ratio * ratio_var.sqrt()).filter(|v| v.is_finite()),
    });

    let mut flags = vec![FitFlag::SaturationDegenerate];
    if !(rep.stderr[4] <= 0.5) {
        flags.push(FitFlag::QpUnconstrained {
            q_qp0_lower_bound: problem.qp_lower_bound(),
        });
    }
    flags.extend(common_flags(
        &JOINT_PARAMS,
        &rep,
        &["d_sat", "beta2", "q_qp0"],
    ));

    let params = LossModelParams {
        q_tls0: estimates[0].value,
        d_sat: estimates[1].value,
        beta1: estimates[2].value,
        beta2: estimates[3].value,
        q_qp0: estimates[4].value,
        q_other: estimates[5].value,
        tc: data.tc_k,
        f0: data.f0_hz,
    };
    Ok(report_from(
        &data.resonator_id,
        FitModel::LossVsTemperature,
        params,
        estimates,
        points.len(),
        &rep,
        best,
        starts,
        flags,
    ))
}
