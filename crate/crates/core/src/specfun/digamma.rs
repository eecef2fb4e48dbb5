use num_complex::Complex64;

use super::SpecFunError;

/// Below this modulus the argument is shifted up with the recurrence
/// ψ(z) = ψ(z + 1) − 1/z before the asymptotic series is applied.
const SHIFT_RADIUS: f64 = 16.0;

/// B₂ₖ / (2k) for k = 1..=8.
const ASYMPTOTIC_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// Digamma function for complex arguments with positive real part.
///
/// Uses upward recurrence until |z| ≥ 16 and then the Stirling-type series
/// ψ(w) ≈ ln w − 1/(2w) − Σ B₂ₖ/(2k w²ᵏ), which is accurate to well below
/// f64 rounding at that radius.
pub fn digamma_complex(z: Complex64) -> Complex64 {
    debug_assert!(z.re > 0.0, "digamma_complex requires Re z > 0");
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while w.norm() < SHIFT_RADIUS {
        shift += w.inv();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    // Horner evaluation of Σ c_k w^{-2k}
    let mut series = Complex64::new(0.0, 0.0);
    for c in ASYMPTOTIC_COEFFS.iter().rev() {
        series = (series + c) * inv2;
    }
    w.ln() - 0.5 * inv - series - shift
}

/// Re ψ(½ + i·x).
///
/// The function is even in `x`; the implementation evaluates at |x| so the
/// symmetry holds bit for bit.
pub fn re_digamma_half_plus_ix(x: f64) -> Result<f64, SpecFunError> {
    if !x.is_finite() {
        return Err(SpecFunError::NonFinite {
            name: "x",
            value: x,
        });
    }
    Ok(digamma_complex(Complex64::new(0.5, x.abs())).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::EULER_GAMMA;

    #[test]
    fn digamma_at_one_half() {
        let expected = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        let got = re_digamma_half_plus_ix(0.0).unwrap();
        assert!(
            (got - expected).abs() < 1e-14 * expected.abs(),
            "{got} vs {expected}"
        );
    }

    #[test]
    fn digamma_real_recurrence() {
        // ψ(1) = −γ and ψ(n + 1) = ψ(n) + 1/n
        let psi1 = digamma_complex(Complex64::new(1.0, 0.0));
        assert!((psi1.re + EULER_GAMMA).abs() < 1e-15);
        let psi4 = digamma_complex(Complex64::new(4.0, 0.0));
        let expected = -EULER_GAMMA + 1.0 + 0.5 + 1.0 / 3.0;
        assert!((psi4.re - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(re_digamma_half_plus_ix(f64::NAN).is_err());
        assert!(re_digamma_half_plus_ix(f64::INFINITY).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let a = re_digamma_half_plus_ix(0.7).unwrap();
        let b = re_digamma_half_plus_ix(-0.7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
