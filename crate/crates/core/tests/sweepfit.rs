use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use resq_core::models::{
    q_int_total, reference_loss_params, reference_shift_params, LossModelParams, PowerLawTlsParams,
    ShiftModelParams, REFERENCE_F0, REFERENCE_TC,
};
use resq_core::sweepfit::lm::{
    lm_minimize, numerical_jacobian, Bounds, LeastSquaresProblem, LmOptions,
};
use resq_core::sweepfit::synth::{
    log_grid, synth_loss_dataset, synth_power_dataset, synth_shift_dataset,
};
use resq_core::sweepfit::{
    compare_tls_estimates, fit_freq_shift, fit_power_sweep, fit_qint_vs_t, FitFlag, FitModel,
    FitOptions, JointLossProblem, PowerSweepProblem, ResidualScale, ShiftProblem,
};

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

struct Rosenbrock;

impl LeastSquaresProblem for Rosenbrock {
    fn num_params(&self) -> usize {
        2
    }
    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![
            10.0 * (x[1] - x[0] * x[0]),
            1.0 - x[0],
        ]))
    }
}

#[test]
fn rosenbrock_with_numeric_jacobian() {
    let rep = lm_minimize(
        &Rosenbrock,
        &[-1.2, 1.0],
        &Bounds::unbounded(2),
        &LmOptions::default(),
    )
    .unwrap();
    assert!((rep.params[0] - 1.0).abs() < 1e-8);
    assert!((rep.params[1] - 1.0).abs() < 1e-8);
}

struct Quadratic {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LeastSquaresProblem for Quadratic {
    fn num_params(&self) -> usize {
        3
    }
    fn residuals(&self, p: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::from_fn(self.x.len(), |i, _| {
            p[0] + p[1] * self.x[i] + p[2] * self.x[i] * self.x[i] - self.y[i]
        }))
    }
    fn jacobian(&self, _p: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_fn(self.x.len(), 3, |i, j| {
            self.x[i].powi(j as i32)
        }))
    }
}

#[test]
fn linear_problem_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|t| 1.5 - 0.7 * t + 0.3 * t * t + 0.05 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let problem = Quadratic { x, y: y.clone() };
    let a = problem.jacobian(&DVector::zeros(3)).unwrap();
    let normal = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * DVector::from_vec(y)))
        .unwrap();
    let rep = lm_minimize(
        &problem,
        &[0.0, 0.0, 0.0],
        &Bounds::unbounded(3),
        &LmOptions::default(),
    )
    .unwrap();
    for k in 0..3 {
        assert!(
            rel(rep.params[k], normal[k]) < 1e-10,
            "{k}: {} vs {}",
            rep.params[k],
            normal[k]
        );
    }
    assert!(rep.converged);
}

fn power_truth() -> PowerLawTlsParams {
    PowerLawTlsParams {
        q_tls0: 3e6,
        n_c: 50.0,
        beta_exp: 0.4,
        q_other: 2e7,
        temperature: 0.02,
        f0: REFERENCE_F0,
    }
}

#[test]
fn power_fit_exact_on_noiseless_data() {
    let truth = power_truth();
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 1e7, 29), 0.0, 1).unwrap();
    let rep = fit_power_sweep(&data, truth.temperature, &FitOptions::default()).unwrap();
    assert!(rep.converged);
    assert!(rel(rep.params.q_tls0, truth.q_tls0) < 1e-6);
    assert!(rel(rep.params.n_c, truth.n_c) < 1e-6);
    assert!(rel(rep.params.beta_exp, truth.beta_exp) < 1e-6);
    assert!(rel(rep.params.q_other, truth.q_other) < 1e-6);
    assert!(rep.flags.is_empty(), "{:?}", rep.flags);
}

#[test]
fn power_fit_with_two_percent_noise() {
    let truth = power_truth();
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 1e7, 29), 0.02, 7).unwrap();
    let rep = fit_power_sweep(&data, truth.temperature, &FitOptions::default()).unwrap();
    assert!(rel(rep.params.q_tls0, truth.q_tls0) < 0.1);
    assert!(rel(rep.params.n_c, truth.n_c) < 0.1);
    assert!(rel(rep.params.beta_exp, truth.beta_exp) < 0.1);
    assert!(rel(rep.params.q_other, truth.q_other) < 0.1);
    let se = rep.estimate("q_tls0").unwrap().stderr.unwrap();
    assert!(se > 0.0 && se < 0.1 * truth.q_tls0);
}

#[test]
fn power_fit_without_floor() {
    let truth = PowerLawTlsParams {
        q_other: f64::INFINITY,
        ..power_truth()
    };
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 1e7, 29), 0.02, 11).unwrap();
    let rep = fit_power_sweep(&data, truth.temperature, &FitOptions::default()).unwrap();
    let inv = rep.estimate("inverse_q_other").unwrap();
    if let Some(se) = inv.stderr {
        assert!(inv.value <= 2.0 * se, "{} ± {}", inv.value, se);
    }
}

#[test]
fn power_fit_reproduces_single_photon_plateau() {
    let truth = power_truth();
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 1e7, 29), 0.02, 5).unwrap();
    let rep = fit_power_sweep(&data, truth.temperature, &FitOptions::default()).unwrap();
    let at_one = resq_core::models::q_int_power(&rep.params, 1.0).unwrap();
    let first = data.loss_points().unwrap()[0];
    assert_eq!(first.n_ph, 1.0);
    assert!((at_one - first.q_i).abs() < 3.0 * first.sigma());
}

#[test]
fn narrow_power_range_is_flagged() {
    let truth = power_truth();
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 100.0, 10), 0.0, 1).unwrap();
    let rep = fit_power_sweep(&data, truth.temperature, &FitOptions::default()).unwrap();
    assert!(rep.has_flag(|f| matches!(f, FitFlag::NarrowPowerRange { .. })));
}

#[test]
fn too_few_points_is_an_error() {
    let truth = power_truth();
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 1e7, 5), 0.0, 1).unwrap();
    assert!(fit_power_sweep(&data, truth.temperature, &FitOptions::default()).is_err());
}

const TEMPS: [f64; 5] = [0.02, 0.3, 0.6, 0.9, 1.2];

fn joint_grid() -> Vec<f64> {
    log_grid(1.0, 1e5, 6)
}

#[test]
fn joint_fit_noiseless_resonator_two() {
    let truth = reference_loss_params()[1];
    let data = synth_loss_dataset("r2", &truth, &joint_grid(), &TEMPS, 0.0, 1).unwrap();
    let rep = fit_qint_vs_t(&data, &FitOptions::default()).unwrap();
    assert!(rep.converged);
    assert!(rel(rep.params.q_tls0, truth.q_tls0) < 0.01);
    assert!(rel(rep.params.q_other, truth.q_other) < 0.01);
    assert!(rel(rep.params.beta1, truth.beta1) < 0.05);
    let ratio = rep.estimate("beta2_over_d").unwrap();
    assert!(rel(ratio.value, truth.beta2 / truth.d_sat) < 0.05);
    assert!(ratio.stderr.is_some());
    // D and β₂ separately, and Q_QP,0, are not identifiable from these data
    assert!(rep.estimate("d_sat").unwrap().stderr.is_none());
    assert!(rep.has_flag(|f| *f == FitFlag::SaturationDegenerate));
    let bound = rep
        .flags
        .iter()
        .find_map(|f| match f {
            FitFlag::QpUnconstrained { q_qp0_lower_bound } => Some(*q_qp0_lower_bound),
            _ => None,
        })
        .expect("Q_QP,0 flagged");
    assert!(bound <= truth.q_qp0);
}

#[test]
fn joint_fit_three_percent_noise_monte_carlo() {
    let truth = reference_loss_params()[1];
    let mut errors: Vec<f64> = (0..50)
        .map(|k| {
            let data =
                synth_loss_dataset("r2", &truth, &joint_grid(), &TEMPS, 0.03, 1000 + k).unwrap();
            assert_eq!(data.points.len(), 30);
            let opts = FitOptions {
                seed: k,
                ..Default::default()
            };
            rel(
                fit_qint_vs_t(&data, &opts).unwrap().params.q_tls0,
                truth.q_tls0,
            )
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    assert!(errors[25] < 0.15, "median {}", errors[25]);
}

fn rising_params() -> LossModelParams {
    LossModelParams {
        q_tls0: 2.6e6,
        d_sat: 5.8,
        beta1: 0.9,
        beta2: 0.1,
        q_qp0: 1e5,
        q_other: 2.6e9,
        tc: REFERENCE_TC,
        f0: REFERENCE_F0,
    }
}

#[test]
fn fitted_curve_rises_more_than_fourfold() {
    let truth = rising_params();
    let temps = [0.02, 0.1, 0.3, 0.6, 1.0, 1.4, 1.8, 2.2, 2.6];
    let data = synth_loss_dataset("r1", &truth, &log_grid(1.0, 1e6, 7), &temps, 0.0, 1).unwrap();
    let rep = fit_qint_vs_t(&data, &FitOptions::default()).unwrap();
    assert!(!rep.has_flag(|f| matches!(f, FitFlag::QpUnconstrained { .. })));
    assert!(rel(rep.params.q_qp0, truth.q_qp0) < 0.01);
    let curve: Vec<f64> = log_grid(0.02, 2.6, 200)
        .iter()
        .map(|&t| q_int_total(&rep.params, 1.0, t).unwrap())
        .collect();
    let peak = curve.iter().cloned().fold(0.0, f64::max);
    let peak_at = curve.iter().position(|q| *q == peak).unwrap();
    assert!(peak / curve[0] > 4.0, "rise {}", peak / curve[0]);
    assert!(peak_at > 0 && peak_at < curve.len() - 1, "peak is interior");
}

#[test]
fn joint_fit_rejects_thin_data() {
    let truth = reference_loss_params()[1];
    let data = synth_loss_dataset("r", &truth, &joint_grid(), &[0.02, 0.5], 0.0, 1).unwrap();
    assert!(fit_qint_vs_t(&data, &FitOptions::default()).is_err());
}

fn shift_temps() -> Vec<f64> {
    log_grid(0.02, 1.5, 25)
}

#[test]
fn shift_fit_noiseless() {
    let truth = reference_shift_params()[0];
    let data = synth_shift_dataset("s", &truth, &shift_temps(), 0.0, 1e-9, 1).unwrap();
    let rep = fit_freq_shift(&data, &FitOptions::default()).unwrap();
    assert!(rep.converged);
    assert!(rel(rep.params.q_tls0, truth.q_tls0) < 0.005);
    assert!(rel(rep.params.alpha_kin, truth.alpha_kin) < 0.005);
    assert!(rep.estimate("alpha_kin").unwrap().stderr.is_some());
}

#[test]
fn shift_fit_null_kinetic_inductance() {
    let truth = ShiftModelParams {
        alpha_kin: 0.0,
        ..reference_shift_params()[0]
    };
    let data = synth_shift_dataset("s", &truth, &shift_temps(), 1e-9, 1e-9, 4).unwrap();
    let rep = fit_freq_shift(&data, &FitOptions::default()).unwrap();
    let a = rep.estimate("alpha_kin").unwrap();
    assert!(
        a.value <= 2.0 * a.stderr.unwrap(),
        "{} ± {:?}",
        a.value,
        a.stderr
    );
}

/// Loss data, a power sweep and a shift sweep that share one Q_TLS,0.
fn joint_synthetic(
    seed: u64,
) -> (
    resq_core::sweepfit::SweepDataset,
    resq_core::sweepfit::SweepDataset,
    resq_core::sweepfit::SweepDataset,
) {
    // row 3 puts the critical photon number inside the power sweep; for
    // row 2 it lies below one photon and Q_TLS,0 trades off against n_c
    let loss = reference_loss_params()[2];
    let shift = ShiftModelParams {
        q_tls0: loss.q_tls0,
        ..reference_shift_params()[2]
    };
    let l = synth_loss_dataset("r", &loss, &joint_grid(), &TEMPS, 0.02, seed).unwrap();
    let mut p =
        synth_loss_dataset("r", &loss, &log_grid(1.0, 1e7, 29), &[0.02], 0.02, seed + 1).unwrap();
    p.resonator_id = "r".into();
    let s = synth_shift_dataset("r", &shift, &shift_temps(), 2e-9, 2e-9, seed + 2).unwrap();
    (l, p, s)
}

#[test]
fn tls_estimates_agree_across_models() {
    let (l, p, s) = joint_synthetic(21);
    let opts = FitOptions::default();
    let joint = fit_qint_vs_t(&l, &opts).unwrap();
    let power = fit_power_sweep(&p, 0.02, &opts).unwrap();
    let shift = fit_freq_shift(&s, &opts).unwrap();
    assert!(rel(joint.params.q_tls0, shift.params.q_tls0) < 0.10);
    let cmp = compare_tls_estimates(Some(&joint), Some(&shift), Some(&power));
    assert_eq!(cmp.estimates.len(), 3);
    assert!(!cmp.partial);
    assert!(cmp.max_pairwise_ratio.unwrap() < 1.15, "{cmp:?}");
    assert!(cmp.warning.is_none());

    let two = compare_tls_estimates(Some(&joint), None, Some(&power));
    assert_eq!(two.estimates.len(), 2);
    assert_eq!(two.missing, vec![FitModel::FrequencyShift]);
    assert!(two.partial && two.max_pairwise_ratio.is_some());

    let mut off = shift.clone();
    off.estimates[0].value *= 3.0;
    let bad = compare_tls_estimates(Some(&joint), Some(&off), None);
    assert!(bad.max_pairwise_ratio.unwrap() > 2.0);
    assert!(bad.warning.is_some());
}

fn check_jacobian<P: LeastSquaresProblem>(problem: &P, x: &DVector<f64>) {
    let analytic = problem.jacobian(x).unwrap();
    let numeric = numerical_jacobian(|p| problem.residuals(p), x).unwrap();
    // entries far below the largest one are dominated by rounding in the
    // finite difference, so the relative check is floored there
    let scale = analytic.amax();
    for j in 0..analytic.ncols() {
        for i in 0..analytic.nrows() {
            let (a, n) = (analytic[(i, j)], numeric[(i, j)]);
            assert!(
                (a - n).abs() <= 1e-6 * a.abs().max(1e-3 * scale),
                "({i},{j}): {a} vs {n} at {x:?}"
            );
        }
    }
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let loss = reference_loss_params()[1];
    let data = synth_loss_dataset("r", &loss, &joint_grid(), &TEMPS, 0.02, 1).unwrap();
    let pts = data.loss_points().unwrap();
    let shift = synth_shift_dataset(
        "s",
        &reference_shift_params()[0],
        &shift_temps(),
        1e-9,
        1e-9,
        2,
    )
    .unwrap();
    let spts = shift.shift_points().unwrap();
    for scale in [ResidualScale::Log, ResidualScale::Linear] {
        let joint = JointLossProblem::new(&pts, loss.f0, loss.tc, scale).unwrap();
        let power = PowerSweepProblem::new(&pts, loss.f0, 0.02, scale).unwrap();
        for _ in 0..20 {
            let lp = LossModelParams {
                q_tls0: 10f64.powf(rng.gen_range(5.0..8.0)),
                d_sat: 10f64.powf(rng.gen_range(-1.0..3.0)),
                beta1: rng.gen_range(0.1..5.0),
                beta2: 10f64.powf(rng.gen_range(-1.0..2.0)),
                q_qp0: 10f64.powf(rng.gen_range(4.0..9.0)),
                q_other: 10f64.powf(rng.gen_range(6.0..9.0)),
                ..loss
            };
            check_jacobian(&joint, &JointLossProblem::internal(&lp));
            let pp = PowerLawTlsParams {
                q_tls0: lp.q_tls0,
                n_c: 10f64.powf(rng.gen_range(-1.0..4.0)),
                beta_exp: rng.gen_range(0.1..1.0),
                q_other: lp.q_other,
                temperature: 0.02,
                f0: loss.f0,
            };
            check_jacobian(&power, &PowerSweepProblem::internal(&pp));
        }
    }
    let sp = ShiftProblem::new(&spts, REFERENCE_F0, REFERENCE_TC).unwrap();
    for _ in 0..20 {
        let p = ShiftModelParams {
            q_tls0: 10f64.powf(rng.gen_range(5.0..8.0)),
            alpha_kin: rng.gen_range(1e-4..0.1),
            ..reference_shift_params()[0]
        };
        check_jacobian(&sp, &ShiftProblem::internal(&p));
    }
}

#[test]
fn log_and_linear_residuals_agree() {
    let truth = power_truth();
    let data =
        synth_power_dataset("p", &truth, REFERENCE_TC, &log_grid(1.0, 1e7, 29), 0.01, 3).unwrap();
    let log = fit_power_sweep(&data, truth.temperature, &FitOptions::default()).unwrap();
    let lin = fit_power_sweep(
        &data,
        truth.temperature,
        &FitOptions {
            residuals: ResidualScale::Linear,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(rel(log.params.q_tls0, lin.params.q_tls0) < 0.01);
}

#[test]
fn one_sigma_intervals_cover_about_two_thirds() {
    let truth = power_truth();
    let grid = log_grid(1.0, 1e7, 29);
    let opts = FitOptions {
        random_starts: 0,
        ..Default::default()
    };
    let covered = (0..200)
        .filter(|&k| {
            let data =
                synth_power_dataset("p", &truth, REFERENCE_TC, &grid, 0.02, 5000 + k).unwrap();
            let rep = fit_power_sweep(&data, truth.temperature, &opts).unwrap();
            let e = rep.estimate("q_tls0").unwrap();
            (e.value - truth.q_tls0).abs() <= e.stderr.unwrap()
        })
        .count();
    let frac = covered as f64 / 200.0;
    assert!((0.60..=0.75).contains(&frac), "coverage {frac}");
}

#[test]
fn fits_are_bit_reproducible() {
    let truth = reference_loss_params()[2];
    let data = synth_loss_dataset("r3", &truth, &joint_grid(), &TEMPS, 0.03, 8).unwrap();
    let opts = FitOptions {
        seed: 42,
        ..Default::default()
    };
    let a = serde_json::to_string(&fit_qint_vs_t(&data, &opts).unwrap()).unwrap();
    let b = serde_json::to_string(&fit_qint_vs_t(&data, &opts).unwrap()).unwrap();
    assert_eq!(a, b);
}
