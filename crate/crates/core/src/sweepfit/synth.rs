//! Seeded synthetic sweep datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{LossPoint, ShiftPoint, SweepDataset, SweepFitError};
use crate::models::{
    freq_shift_total, q_int_power, q_int_total, LossModelParams, PowerLawTlsParams,
    ShiftModelParams,
};

/// Log-spaced grid of `count` values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Multiplicative noise: Q·exp(σ·N(0,1)), sigma recorded as σ·Q_noisy.
/// `relative_noise = 0` gives exact values with a nominal 1 % sigma.
fn noisy_q(q: f64, relative_noise: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let z: f64 = StandardNormal.sample(rng);
    let value = q * (relative_noise * z).exp();
    let rel = if relative_noise > 0.0 {
        relative_noise
    } else {
        0.01
    };
    (value, rel * value)
}

/// Q_int of the joint loss model on every (n_ph, T) of the grid.
pub fn synth_loss_dataset(
    id: &str,
    params: &LossModelParams,
    n_ph: &[f64],
    temperatures: &[f64],
    relative_noise: f64,
    seed: u64,
) -> Result<SweepDataset, SweepFitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_ph.len() * temperatures.len());
    for &t in temperatures {
        for &n in n_ph {
            let q = q_int_total(params, n, t)?;
            let (q_i, sigma) = noisy_q(q, relative_noise, &mut rng);
            points.push(LossPoint {
                n_ph: n,
                t_k: t,
                q_i,
                q_i_sigma: Some(sigma),
            });
        }
    }
    Ok(SweepDataset::from_loss(id, params.f0, params.tc, points))
}

/// Q_int of the power-law model at its fixed temperature.
pub fn synth_power_dataset(
    id: &str,
    params: &PowerLawTlsParams,
    tc: f64,
    n_ph: &[f64],
    relative_noise: f64,
    seed: u64,
) -> Result<SweepDataset, SweepFitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_ph.len());
    for &n in n_ph {
        let q = q_int_power(params, n)?;
        let (q_i, sigma) = noisy_q(q, relative_noise, &mut rng);
        points.push(LossPoint {
            n_ph: n,
            t_k: params.temperature,
            q_i,
            q_i_sigma: Some(sigma),
        });
    }
    Ok(SweepDataset::from_loss(id, params.f0, tc, points))
}

/// δf/f₀ with additive Gaussian noise of `noise` (absolute). A zero noise
/// level records `nominal_sigma` as the point uncertainty.
pub fn synth_shift_dataset(
    id: &str,
    params: &ShiftModelParams,
    temperatures: &[f64],
    noise: f64,
    nominal_sigma: f64,
    seed: u64,
) -> Result<SweepDataset, SweepFitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let z: f64 = StandardNormal.sample(&mut rng);
        points.push(ShiftPoint {
            t_k: t,
            df_f0: freq_shift_total(params, t)? + noise * z,
            sigma: if noise > 0.0 { noise } else { nominal_sigma },
        });
    }
    Ok(SweepDataset::from_shift(id, params.f0, params.tc, points))
}
