//! Special functions needed by the loss and frequency-shift models.
//!
//! Everything here is a pure function of its arguments. Inputs outside the
//! documented domain are rejected with [`SpecFunError`] rather than
//! silently producing NaN.

mod bessel;
mod conductivity;
mod digamma;

pub use bessel::{bessel_i0, bessel_i0e, bessel_k0, bessel_k0e, bessel_k1, bessel_k1e};
pub use conductivity::{mattis_bardeen_sigma, ComplexConductivityPoint};
pub use digamma::{digamma_complex, re_digamma_half_plus_ix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error(
        "photon energy exceeds the pair-breaking threshold: hbar*omega = {photon_energy:e} J >= 2*gap = {two_gap:e} J"
    )]
    PairBreaking { photon_energy: f64, two_gap: f64 },
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64, SpecFunError> {
    if !value.is_finite() {
        return Err(SpecFunError::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(SpecFunError::NonPositive { name, value });
    }
    Ok(value)
}
