//! Physical and mathematical constants (CODATA 2018, SI units).

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// BCS weak-coupling ratio Δ₀ / (k_B T_c).
pub const BCS_GAP_RATIO: f64 = 1.764;
