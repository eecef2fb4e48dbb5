use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::lm::LeastSquaresProblem;
use super::{
    common_flags, estimates_from, multistart, report_from, FitModel, FitOptions, FitReport,
    ParamSpec, ShiftPoint, SweepDataset, SweepFitError,
};
use crate::constants::BOLTZMANN;
use crate::models::{gap0, reduced_frequency, ModelError, ShiftModelParams};
use crate::specfun;

/// Fitted coordinates: Q_TLS,0 and the kinetic-inductance fraction α.
pub const SHIFT_PARAMS: [ParamSpec; 2] = [
    ParamSpec::log("q_tls0", 1e4, 1e11),
    ParamSpec::linear("alpha_kin", 0.0, 0.999, false),
];

const MIN_POINTS: usize = 4;

/// δf/f₀ = b/(π Q_TLS,0) − α·a with per-point constants a, b.
pub struct ShiftProblem {
    /// Re ψ(½ + iξ) − ln ξ.
    tls: Vec<f64>,
    /// e^(−Δ₀/k_BT) · e^(−ξ) I₀(ξ).
    qp: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
}

impl ShiftProblem {
    pub fn new(points: &[ShiftPoint], f0: f64, tc: f64) -> Result<Self, SweepFitError> {
        let gap = gap0(tc)?;
        let mut tls = Vec::with_capacity(points.len());
        let mut qp = Vec::with_capacity(points.len());
        for p in points {
            let xi = reduced_frequency(f0, p.t_k)?;
            let psi = specfun::re_digamma_half_plus_ix(xi).map_err(ModelError::from)?;
            tls.push(psi - xi.ln());
            let i0e = specfun::bessel_i0e(xi).map_err(ModelError::from)?;
            qp.push((-gap / (BOLTZMANN * p.t_k)).exp() * i0e);
        }
        Ok(Self {
            tls,
            qp,
            y: points.iter().map(|p| p.df_f0).collect(),
            sigma: points.iter().map(|p| p.sigma).collect(),
        })
    }

    pub fn internal(p: &ShiftModelParams) -> DVector<f64> {
        DVector::from_vec(vec![p.q_tls0.ln(), p.alpha_kin])
    }

    /// Weighted linear least squares in (1/(πQ), α), ignoring bounds.
    fn linear_start(&self) -> [f64; 2] {
        let mut m = Matrix2::zeros();
        let mut v = Vector2::zeros();
        for i in 0..self.y.len() {
            let w = 1.0 / (self.sigma[i] * self.sigma[i]);
            let row = Vector2::new(self.tls[i], -self.qp[i]);
            m += w * row * row.transpose();
            v += w * self.y[i] * row;
        }
        let sol = m.try_inverse().map(|inv| inv * v);
        match sol {
            Some(s) if s[0] > 0.0 => [1.0 / (PI * s[0]), s[1].max(0.0)],
            _ => [1e6, 1e-3],
        }
    }
}

impl LeastSquaresProblem for ShiftProblem {
    fn num_params(&self) -> usize {
        2
    }

    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let inv_q = (-x[0]).exp() / PI;
        Some(DVector::from_fn(self.y.len(), |i, _| {
            (self.tls[i] * inv_q - x[1] * self.qp[i] - self.y[i]) / self.sigma[i]
        }))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let inv_q = (-x[0]).exp() / PI;
        let mut j = DMatrix::zeros(self.y.len(), 2);
        for i in 0..self.y.len() {
            j[(i, 0)] = -self.tls[i] * inv_q / self.sigma[i];
            j[(i, 1)] = -self.qp[i] / self.sigma[i];
        }
        Some(j)
    }
}

/// Two-parameter fit of the temperature-dependent frequency shift.
pub fn fit_freq_shift(
    data: &SweepDataset,
    options: &FitOptions,
) -> Result<FitReport<ShiftModelParams>, SweepFitError> {
    let points = data.shift_points()?;
    if points.len() < MIN_POINTS {
        return Err(SweepFitError::InsufficientData {
            what: "frequency-shift points",
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    let problem = ShiftProblem::new(&points, data.f0_hz, data.tc_k)?;
    let informed = problem.linear_start();
    let (rep, best, starts) = multistart(&problem, &SHIFT_PARAMS, &informed, options)?;
    let estimates = estimates_from(&SHIFT_PARAMS, &rep);
    // α at its lower bound is the expected null result, not a warning
    let flags = common_flags(&SHIFT_PARAMS, &rep, &["alpha_kin"])
        .into_iter()
        .filter(|f| {
            !matches!(f, super::FitFlag::AtBound { parameter } if parameter == "alpha_kin" && rep.params[1] == 0.0)
        })
        .collect();
    let params = ShiftModelParams {
        q_tls0: estimates[0].value,
        alpha_kin: estimates[1].value,
        tc: data.tc_k,
        f0: data.f0_hz,
    };
    Ok(report_from(
        &data.resonator_id,
        FitModel::FrequencyShift,
        params,
        estimates,
        points.len(),
        &rep,
        best,
        starts,
        flags,
    ))
}
