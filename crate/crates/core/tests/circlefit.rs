use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use resq_core::circlefit::{
    fit_circle, linewidth_grid, photons_in_resonator, synth_s21, CircleFitError, ComplexTrace,
    NotchModelParams, NotchProblem,
};
use resq_core::sweepfit::lm::LeastSquaresProblem;

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn reference() -> NotchModelParams {
    NotchModelParams {
        f_res: 4.8e9,
        q_l: 2.4e5,
        q_c_mag: 3e5,
        phi0: 0.0,
        amp: 1.0,
        alpha_env: 0.0,
        tau: 0.0,
    }
}

/// Noise level giving a circle-radius-to-noise ratio of `snr`.
fn noise_for(p: &NotchModelParams, snr: f64) -> f64 {
    p.amp * p.q_l / (2.0 * p.q_c_mag) / snr
}

#[test]
fn trace_minimum_sits_at_resonance() {
    let p = reference();
    let grid = linewidth_grid(&p, 5.0, 201);
    let trace = synth_s21(&p, &grid, 0.0, 0).unwrap();
    let k = (0..grid.len())
        .min_by(|&a, &b| trace.s21[a].norm().total_cmp(&trace.s21[b].norm()))
        .unwrap();
    // dense oracle: evaluate |S21| on a 100x finer grid and take the argmin
    let fine = linewidth_grid(&p, 5.0, 20001);
    let f_min = fine
        .iter()
        .cloned()
        .min_by(|a, b| p.s21(*a).norm().total_cmp(&p.s21(*b).norm()))
        .unwrap();
    let step = grid[1] - grid[0];
    assert!((grid[k] - p.f_res).abs() <= step);
    assert!((f_min - p.f_res).abs() <= step);
}

#[test]
fn noiseless_round_trip_at_reference_qi() {
    let p = NotchModelParams::from_qi(4.8e9, 2.7e6, 3e5, 0.0, 1.0, 0.0, 0.0);
    let trace = synth_s21(&p, &linewidth_grid(&p, 5.0, 201), 0.0, 0).unwrap();
    let fit = fit_circle(&trace).unwrap();
    assert!(rel(fit.q_i, 2.7e6) < 1e-3, "{}", fit.q_i);
}

#[test]
fn snr_ten_over_two_hundred_seeds() {
    let p = NotchModelParams::from_qi(4.8e9, 2.7e6, 2.7e6, 0.1, 0.8, 1.0, 30e-9);
    let grid = linewidth_grid(&p, 5.0, 201);
    let sigma = noise_for(&p, 10.0);
    let mut errors: Vec<f64> = (0..200)
        .map(|seed| {
            let fit = fit_circle(&synth_s21(&p, &grid, sigma, seed).unwrap())
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            rel(fit.q_i, p.q_i())
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    assert!(errors[100] < 0.05, "median {}", errors[100]);
}

#[test]
fn impedance_mismatch_is_corrected() {
    let p = NotchModelParams::from_qi(4.8e9, 1e6, 5e5, 0.4, 1.0, 0.0, 0.0);
    let grid = linewidth_grid(&p, 5.0, 201);
    let exact = fit_circle(&synth_s21(&p, &grid, 0.0, 0).unwrap()).unwrap();
    assert!((exact.params.phi0 - 0.4).abs() < 0.02);
    assert!(rel(exact.q_i, 1e6) < 0.01);
    // unbiased under noise: mean over repeats
    let sigma = noise_for(&p, 30.0);
    let fits: Vec<_> = (0..100)
        .map(|s| fit_circle(&synth_s21(&p, &grid, sigma, s).unwrap()).unwrap())
        .collect();
    let mean_qi = fits.iter().map(|f| f.q_i).sum::<f64>() / fits.len() as f64;
    let mean_phi = fits.iter().map(|f| f.params.phi0).sum::<f64>() / fits.len() as f64;
    assert!(rel(mean_qi, 1e6) < 0.01, "mean Q_i {mean_qi}");
    assert!((mean_phi - 0.4).abs() < 0.02);
}

#[test]
fn delay_does_not_move_qi() {
    let base = NotchModelParams::from_qi(4.8e9, 5e5, 2e5, 0.2, 1.0, 0.3, 0.0);
    let grid = linewidth_grid(&base, 5.0, 201);
    let q0 = fit_circle(&synth_s21(&base, &grid, 0.0, 0).unwrap())
        .unwrap()
        .q_i;
    for tau in [1e-9, 10e-9, 50e-9, 100e-9] {
        let p = NotchModelParams { tau, ..base };
        let fit = fit_circle(&synth_s21(&p, &grid, 0.0, 0).unwrap()).unwrap();
        assert!(rel(fit.q_i, q0) < 0.005, "tau {tau}: {} vs {q0}", fit.q_i);
        assert!((fit.params.tau - tau).abs() < 1e-12);
    }
}

#[test]
fn environment_does_not_move_fit() {
    let base = NotchModelParams::from_qi(4.8e9, 5e5, 2e5, -0.3, 1.0, 0.0, 0.0);
    let grid = linewidth_grid(&base, 5.0, 201);
    let ref_fit = fit_circle(&synth_s21(&base, &grid, 0.0, 0).unwrap()).unwrap();
    for (amp, alpha) in [(0.1, 2.0), (3.0, -2.5), (0.5, PI)] {
        let p = NotchModelParams {
            amp,
            alpha_env: alpha,
            ..base
        };
        let fit = fit_circle(&synth_s21(&p, &grid, 0.0, 0).unwrap()).unwrap();
        assert!(rel(fit.q_i, ref_fit.q_i) < 1e-3);
        assert!(rel(fit.params.q_l, ref_fit.params.q_l) < 1e-3);
        assert!(rel(fit.params.f_res, ref_fit.params.f_res) < 1e-3);
        assert!(rel(fit.params.amp, amp) < 1e-3);
        assert!(angle_diff(fit.params.alpha_env, alpha) < 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_round_trip(
        f_res in 4.5e9..5.1e9f64,
        log_qi in 5.0..7.3f64,
        coupling in -0.5..0.5f64,
        phi0 in -0.6..0.6f64,
        amp in 0.1..3.0f64,
        alpha in -3.0..3.0f64,
        tau in 0.0..100e-9f64,
    ) {
        let q_i = 10f64.powf(log_qi);
        let p = NotchModelParams::from_qi(f_res, q_i, q_i * 10f64.powf(coupling), phi0, amp, alpha, tau);
        let fit = fit_circle(&synth_s21(&p, &linewidth_grid(&p, 5.0, 201), 0.0, 0).unwrap()).unwrap();
        let got = fit.params;
        prop_assert!(rel(got.f_res, p.f_res) < 1e-3);
        prop_assert!(rel(got.q_l, p.q_l) < 1e-3);
        prop_assert!(rel(got.q_c_mag, p.q_c_mag) < 1e-3);
        prop_assert!(rel(got.amp, p.amp) < 1e-3);
        prop_assert!((got.phi0 - p.phi0).abs() < 1e-3);
        prop_assert!(angle_diff(got.alpha_env, p.alpha_env) < 1e-3);
        prop_assert!((got.tau - p.tau).abs() < 1e-3 * 100e-9);
        prop_assert!(rel(fit.q_i, q_i) < 1e-3);
    }

    #[test]
    fn successful_fits_have_positive_qi(seed in 0u64..1000, snr in 5.0..50.0f64) {
        let p = NotchModelParams::from_qi(4.8e9, 3e6, 1e6, 0.3, 1.0, 0.0, 0.0);
        let trace = synth_s21(&p, &linewidth_grid(&p, 5.0, 201), noise_for(&p, snr), seed).unwrap();
        if let Ok(fit) = fit_circle(&trace) {
            prop_assert!(fit.q_i > 0.0);
            prop_assert!(1.0 / fit.params.q_l >= fit.params.phi0.cos() / fit.params.q_c_mag);
        }
    }
}

/// Five-point stencil with steps sized per coordinate: the resonance
/// coordinate needs a wide step because f/f_r − 1 is only ~1e-5.
fn stencil_jacobian(problem: &NotchProblem, x: &DVector<f64>) -> nalgebra::DMatrix<f64> {
    let steps = [1e-3, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-2];
    let r0 = problem.residuals(x).unwrap();
    let mut j = nalgebra::DMatrix::zeros(r0.len(), 7);
    for (k, h) in steps.iter().enumerate() {
        let at = |m: f64| {
            let mut y = x.clone();
            y[k] += m * h;
            problem.residuals(&y).unwrap()
        };
        let col = (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) / (12.0 * h);
        j.set_column(k, &col);
    }
    j
}

#[test]
fn polish_jacobian_matches_finite_differences() {
    let p = NotchModelParams::from_qi(4.8e9, 1e6, 4e5, 0.3, 0.7, 1.1, 40e-9);
    let grid = linewidth_grid(&p, 5.0, 60);
    let trace = synth_s21(&p, &grid, 1e-3, 1).unwrap();
    let f_ref = 0.5 * (grid[0] + grid[59]);
    let problem = NotchProblem::new(&grid, &trace.s21, f_ref, vec![1.0; 60]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let q = NotchModelParams {
            f_res: p.f_res * (1.0 + rng.gen_range(-2e-6..2e-6)),
            q_l: p.q_l * rng.gen_range(0.5..2.0),
            q_c_mag: p.q_c_mag * rng.gen_range(0.5..2.0),
            phi0: rng.gen_range(-0.5..0.5),
            amp: rng.gen_range(0.5..2.0),
            alpha_env: rng.gen_range(-3.0..3.0),
            tau: rng.gen_range(0.0..1e-7),
        };
        let x: DVector<f64> = problem.internal(&q);
        let a = problem.jacobian(&x).unwrap();
        let n = stencil_jacobian(&problem, &x);
        let scale = a.amax();
        for (ai, ni) in a.iter().zip(n.iter()) {
            assert!(
                (ai - ni).abs() <= 1e-6 * ai.abs().max(1e-3 * scale),
                "{ai} vs {ni}"
            );
        }
    }
}

#[test]
fn degenerate_circle_is_reported() {
    let p = reference();
    let trace = synth_s21(&p, &linewidth_grid(&p, 5.0, 201), noise_for(&p, 2.0), 3).unwrap();
    match fit_circle(&trace) {
        Err(CircleFitError::DegenerateCircle { .. }) => {}
        other => panic!("expected degenerate circle, got {other:?}"),
    }
}

#[test]
fn off_resonance_trace_is_reported() {
    let p = reference();
    let lw = p.linewidth();
    let grid: Vec<f64> = (0..201)
        .map(|k| p.f_res + 20.0 * lw + k as f64 * 0.1 * lw)
        .collect();
    let trace = synth_s21(&p, &grid, 1e-6, 3).unwrap();
    assert!(matches!(
        fit_circle(&trace),
        Err(CircleFitError::OffResonance(_)) | Err(CircleFitError::DegenerateCircle { .. })
    ));
}

#[test]
fn featureless_trace_is_off_resonance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 0.005).unwrap();
    let freqs: Vec<f64> = (0..400).map(|k| 4.79e9 + k as f64 * 1e5).collect();
    let s21 = freqs
        .iter()
        .map(|f| {
            Complex64::from_polar(0.6, -2.0 * PI * f * 45e-9)
                + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
        })
        .collect();
    let trace = ComplexTrace {
        resonator_id: "flat".into(),
        freqs,
        s21,
        drive_power_dbm: None,
        temperature_k: None,
    };
    match fit_circle(&trace) {
        Err(CircleFitError::OffResonance(_)) => {}
        other => panic!("expected off-resonance, got {other:?}"),
    }
}

#[test]
fn malformed_trace_is_rejected() {
    let trace = ComplexTrace {
        resonator_id: "x".into(),
        freqs: vec![1.0, 2.0],
        s21: vec![Complex64::new(1.0, 0.0)],
        drive_power_dbm: None,
        temperature_k: None,
    };
    assert!(matches!(
        fit_circle(&trace),
        Err(CircleFitError::InvalidTrace(_))
    ));
}

fn fitted(p: NotchModelParams, power: Option<f64>) -> resq_core::circlefit::CircleFitResult {
    let mut trace = synth_s21(&p, &linewidth_grid(&p, 5.0, 201), 0.0, 0).unwrap();
    trace.drive_power_dbm = power;
    fit_circle(&trace).unwrap()
}

#[test]
fn photon_number_fixture() {
    let fit = fitted(reference(), None);
    let n = photons_in_resonator(&fit, Some(-140.0), 0.0).unwrap();
    // 2·Q_l²/(Q_c·ħ·ω²)·P with P = 1e-17 W
    let omega = 2.0 * PI * 4.8e9;
    let oracle = 2.0 * 2.4e5f64.powi(2) / (3e5 * 1.054571817e-34 * omega * omega) * 1e-17;
    assert!(rel(n, oracle) < 1e-3, "{n} vs {oracle}");
    assert!((oracle - 40.03).abs() < 0.01);
}

#[test]
fn photon_number_scaling() {
    let fit = fitted(reference(), Some(-100.0));
    let n1 = photons_in_resonator(&fit, None, 40.0).unwrap();
    let n2 = photons_in_resonator(&fit, Some(-100.0 + 10.0 * 2f64.log10()), 40.0).unwrap();
    assert!(rel(n2, 2.0 * n1) < 1e-12);

    let mut half = fit.clone();
    half.params.q_l /= 2.0;
    let n3 = photons_in_resonator(&half, None, 40.0).unwrap();
    assert!(rel(n3, n1 / 4.0) < 1e-12);

    let unpowered = fitted(reference(), None);
    assert_eq!(
        photons_in_resonator(&unpowered, None, 0.0),
        Err(CircleFitError::MissingPower)
    );
}
