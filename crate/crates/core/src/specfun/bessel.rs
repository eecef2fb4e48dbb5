//! Modified Bessel functions of order zero and one.
//!
//! Small arguments (x ≤ 2) use the ascending power series; larger
//! arguments use Steed's continued fraction for K and the large-argument
//! expansion for I. The `*e` variants are exponentially scaled
//! (`K·eˣ`, `I·e⁻ˣ`) so callers can work in log space.

use std::f64::consts::PI;

use super::{require_positive, SpecFunError};
use crate::constants::EULER_GAMMA;

const SERIES_LIMIT: f64 = 2.0;
const I0_SERIES_LIMIT: f64 = 30.0;
const MAX_ITER: usize = 10_000;

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn i0e_asymptotic(x: f64) -> f64 {
    // e⁻ˣ I₀(x) ~ (2πx)^(-1/2) Σ a_k x⁻ᵏ, a_k = ((2k−1)!!)² / (k! 8ᵏ)
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// (K₀(x), K₁(x)) from the ascending series, valid for small x.
fn k01_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_term = (0.5 * x).ln() + EULER_GAMMA;

    // K₀ = −(ln(x/2) + γ) I₀ + Σ_{k≥1} H_k qᵏ/(k!)²
    let mut term0 = 1.0; // qᵏ/(k!)²
    let mut i0 = 1.0;
    let mut harmonic = 0.0;
    let mut k0_tail = 0.0;

    // K₁ = 1/x + ln(x/2) I₁ − (x/4) Σ_{k≥0} [ψ(k+1) + ψ(k+2)] qᵏ/(k!(k+1)!)
    let mut term1 = 1.0; // qᵏ/(k!(k+1)!)
    let mut i1_sum = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut k1_tail = psi_k1 + psi_k2;

    for k in 1..MAX_ITER {
        let kf = k as f64;
        term0 *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term0;
        k0_tail += harmonic * term0;

        term1 *= q / (kf * (kf + 1.0));
        psi_k1 = psi_k2;
        psi_k2 += 1.0 / (kf + 1.0);
        i1_sum += term1;
        k1_tail += (psi_k1 + psi_k2) * term1;

        if term0 < 1e-18 * i0 && term1 < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * x * i1_sum;
    let k0 = -log_term * i0 + k0_tail;
    let k1 = 1.0 / x + (0.5 * x).ln() * i1 - 0.25 * x * k1_tail;
    (k0, k1)
}

/// (eˣK₀(x), eˣK₁(x)) from Steed's continued fraction, for x ≥ 2.
fn k01e_continued_fraction(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0e = (PI / (2.0 * x)).sqrt() / s;
    let k1e = k0e * (x + 0.5 - h) / x;
    (k0e, k1e)
}

fn k01e(x: f64) -> (f64, f64) {
    if x <= SERIES_LIMIT {
        let (k0, k1) = k01_series(x);
        let scale = x.exp();
        (k0 * scale, k1 * scale)
    } else {
        k01e_continued_fraction(x)
    }
}

/// K₀(x), the zeroth-order modified Bessel function of the second kind.
pub fn bessel_k0(x: f64) -> Result<f64, SpecFunError> {
    require_positive("x", x)?;
    if x <= SERIES_LIMIT {
        Ok(k01_series(x).0)
    } else {
        Ok(k01e_continued_fraction(x).0 * (-x).exp())
    }
}

/// eˣ K₀(x).
pub fn bessel_k0e(x: f64) -> Result<f64, SpecFunError> {
    require_positive("x", x)?;
    Ok(k01e(x).0)
}

/// K₁(x).
pub fn bessel_k1(x: f64) -> Result<f64, SpecFunError> {
    require_positive("x", x)?;
    if x <= SERIES_LIMIT {
        Ok(k01_series(x).1)
    } else {
        Ok(k01e_continued_fraction(x).1 * (-x).exp())
    }
}

/// eˣ K₁(x).
pub fn bessel_k1e(x: f64) -> Result<f64, SpecFunError> {
    require_positive("x", x)?;
    Ok(k01e(x).1)
}

/// I₀(x) for real x (even function). Overflows to +inf beyond x ≈ 713.
pub fn bessel_i0(x: f64) -> Result<f64, SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::NonFinite {
            name: "x",
            value: x,
        });
    }
    let ax = x.abs();
    if ax <= I0_SERIES_LIMIT {
        Ok(i0_series(ax))
    } else {
        Ok(i0e_asymptotic(ax) * ax.exp())
    }
}

/// e^{−|x|} I₀(x).
pub fn bessel_i0e(x: f64) -> Result<f64, SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::NonFinite {
            name: "x",
            value: x,
        });
    }
    let ax = x.abs();
    if ax <= I0_SERIES_LIMIT {
        Ok(i0_series(ax) * (-ax).exp())
    } else {
        Ok(i0e_asymptotic(ax))
    }
}
