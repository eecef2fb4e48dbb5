//! Analysis toolkit for superconducting coplanar resonators and the thin
//! tantalum films they are made from.
//!
//! * [`specfun`]: digamma, modified Bessel functions, Mattis–Bardeen conductivity
//! * [`models`]: TLS, quasiparticle and residual loss channels; frequency-shift models
//! * [`circlefit`]: notch-type S21 synthesis and circle-fit extraction of Q_i
//! * [`sweepfit`]: bounded Levenberg–Marquardt and the power/temperature/shift fit campaigns
//! * [`films`]: two-layer resistivity, R(T) analysis, phase classification
//! * [`plot`]: minimal SVG charts for batch reports

pub mod circlefit;
pub mod constants;
pub mod films;
pub mod models;
pub mod plot;
pub mod specfun;
pub mod sweepfit;
