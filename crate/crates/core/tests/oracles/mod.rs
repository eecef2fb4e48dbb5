//! Independent reference implementations used only by the test suites.
//!
//! Each routine reaches its answer by a different route than the library:
//! integral representations evaluated by quadrature, or slowly convergent
//! series summed brute-force with an integral tail correction.
#![allow(dead_code)]

use std::f64::consts::PI;

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Trapezoid rule on [0, ∞) for an even integrand that decays fast;
/// spectrally accurate for analytic integrands.
fn trapezoid_even(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    let mut sum = 0.5 * f(0.0);
    let mut k = 1;
    loop {
        let v = f(k as f64 * step);
        sum += v;
        if v.abs() < 1e-300 || (k > 20 && v.abs() < 1e-22 * sum.abs()) {
            break;
        }
        k += 1;
    }
    sum * step
}

/// eˣ K₀(x) = ∫₀^∞ exp(−x (cosh t − 1)) dt
pub fn k0e_quad(x: f64) -> f64 {
    trapezoid_even(|t| (-x * (t.cosh() - 1.0)).exp(), 1.0 / 64.0)
}

pub fn k0_quad(x: f64) -> f64 {
    k0e_quad(x) * (-x).exp()
}

/// eˣ K₁(x) = ∫₀^∞ exp(−x (cosh t − 1)) cosh t dt
pub fn k1e_quad(x: f64) -> f64 {
    trapezoid_even(|t| (-x * (t.cosh() - 1.0)).exp() * t.cosh(), 1.0 / 64.0)
}

pub fn k1_quad(x: f64) -> f64 {
    k1e_quad(x) * (-x).exp()
}

/// e⁻ˣ I₀(x) = (1/π) ∫₀^π exp(x (cos t − 1)) dt, periodic trapezoid.
pub fn i0e_quad(x: f64) -> f64 {
    let n = 2000usize;
    let h = PI / n as f64;
    let mut sum = 0.5 * (1.0 + (-2.0 * x).exp());
    for k in 1..n {
        sum += (x * ((k as f64 * h).cos() - 1.0)).exp();
    }
    sum * h / PI
}

pub fn i0_quad(x: f64) -> f64 {
    i0e_quad(x) * x.exp()
}

/// Re ψ(½ + ix) = ψ(½) + Σₙ x² / ((n + ½)((n + ½)² + x²)),
/// summed to N terms with an Euler–Maclaurin tail.
pub fn re_digamma_series(x: f64) -> f64 {
    let psi_half = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
    let x2 = x * x;
    let g = |u: f64| x2 / (u * (u * u + x2));
    let n_terms = 200_000usize;
    // sum smallest terms first
    let mut sum = 0.0;
    for n in (0..n_terms).rev() {
        sum += g(n as f64 + 0.5);
    }
    let u0 = n_terms as f64 + 0.5;
    let integral = 0.5 * (1.0 + x2 / (u0 * u0)).ln();
    let h = 1e-3 * u0;
    let dg = (g(u0 + h) - g(u0 - h)) / (2.0 * h);
    let tail = integral + 0.5 * g(u0) - dg / 12.0;
    psi_half + sum + tail
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn fermi(energy: f64, kt: f64) -> f64 {
    let e = (-energy / kt).exp();
    e / (1.0 + e)
}

/// Full Mattis–Bardeen σ₁/σₙ for ħω < 2Δ with Fermi occupation factors:
/// (2/ħω) ∫_Δ^∞ [f(E) − f(E+ħω)] (E² + Δ² + ħωE) / (√(E²−Δ²) √((E+ħω)²−Δ²)) dE,
/// after substituting E = Δ cosh u.
pub fn mattis_bardeen_sigma1_quad(temperature: f64, omega: f64, gap: f64) -> f64 {
    let kt = BOLTZMANN * temperature;
    let hw = HBAR * omega;
    let integrand = |u: f64| {
        let e = gap * u.cosh();
        let occupation = fermi(e, kt) - fermi(e + hw, kt);
        occupation * (e * e + gap * gap + hw * e) / ((e + hw).powi(2) - gap * gap).sqrt()
    };
    // the integrand is negligible once Δ(cosh u − 1) ≫ kT
    let u_max = (1.0 + 60.0 * kt / gap).acosh();
    let peak = integrand(0.0).abs();
    let total = adaptive_simpson(&integrand, 0.0, u_max, 1e-13 * peak * u_max);
    2.0 / hw * total
}

/// Scalar model transcriptions used by the forward-model fidelity checks.
pub mod scalar {
    use super::{BOLTZMANN, HBAR};
    use std::f64::consts::PI;

    pub fn xi(f0: f64, t: f64) -> f64 {
        HBAR * 2.0 * PI * f0 / (2.0 * BOLTZMANN * t)
    }

    pub fn q_tls(q0: f64, d: f64, b1: f64, b2: f64, f0: f64, n: f64, t: f64) -> f64 {
        let th = xi(f0, t).tanh();
        q0 * (1.0 + n * b2 / (d * t.powf(b1)) * th).sqrt() / th
    }

    pub fn q_qp(qqp0: f64, tc: f64, f0: f64, t: f64, k0: impl Fn(f64) -> f64) -> f64 {
        let x = xi(f0, t);
        let gap_over_kt = 1.764 * tc / t;
        qqp0 * gap_over_kt.exp() / (x.sinh() * k0(x))
    }

    pub fn q_power(q0: f64, nc: f64, beta: f64, q_other: f64, f0: f64, t: f64, n: f64) -> f64 {
        let inv = xi(f0, t).tanh() / (q0 * (1.0 + n / nc).powf(beta)) + 1.0 / q_other;
        1.0 / inv
    }

    pub fn shift_tls(q0: f64, f0: f64, t: f64, re_psi: impl Fn(f64) -> f64) -> f64 {
        let x = xi(f0, t);
        (re_psi(x) - x.ln()) / (PI * q0)
    }

    /// QP shift: −(α/2)(1 − σ₂(T)/σ₂(0)) with the thermal σ₂, multiplied out.
    pub fn shift_qp(alpha: f64, tc: f64, f0: f64, t: f64, i0: impl Fn(f64) -> f64) -> f64 {
        let x = xi(f0, t);
        let gap_over_kt = 1.764 * tc / t;
        -0.5 * alpha * 2.0 * (-gap_over_kt).exp() * (-x).exp() * i0(x)
    }
}
