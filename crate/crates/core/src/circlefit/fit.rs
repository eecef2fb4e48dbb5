use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::taubin::{taubin_fit, Circle};
use super::{CircleFitError, CircleFitResult, ComplexTrace, NotchModelParams, NotchStderr};
use crate::sweepfit::lm::{lm_minimize, Bounds, LeastSquaresProblem, LmOptions};

/// Median of |Rayleigh(σ)| is σ·√(2 ln 2).
const RAYLEIGH_MEDIAN: f64 = 1.177_410_022_515_474_6;

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Removes 2π jumps between consecutive angles.
pub fn unwrap_phase(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (k, &a) in angles.iter().enumerate() {
        if k > 0 {
            let d = a - angles[k - 1];
            offset -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
        }
        out.push(a + offset);
    }
    out
}

/// Per-quadrature noise from the median magnitude of second differences.
///
/// For white complex noise of σ per quadrature, z[k+1] − 2z[k] + z[k−1]
/// has σ√6 per quadrature and its magnitude is Rayleigh distributed.
/// Smooth signal curvature adds little on a dense grid, and the median
/// ignores the few points near resonance where it is largest.
pub fn estimate_noise(z: &[Complex64]) -> f64 {
    if z.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = z
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).norm())
        .collect();
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    median / (RAYLEIGH_MEDIAN * 6f64.sqrt())
}

/// Scatter about the mean below this multiple of the noise variance means
/// the trace holds no feature at all.
const FEATURE_SCATTER_RATIO: f64 = 2.0;

/// Mean squared distance from the centroid in units of the complex noise
/// variance 2σ²; about 1 for pure noise.
fn excess_scatter(z: &[Complex64], noise: f64) -> f64 {
    let mean = z.iter().sum::<Complex64>() / z.len() as f64;
    let ms = z.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / z.len() as f64;
    ms / (2.0 * noise * noise)
}

fn remove_delay(freqs: &[f64], z: &[Complex64], f_ref: f64, tau: f64) -> Vec<Complex64> {
    freqs
        .iter()
        .zip(z)
        .map(|(f, s)| s * Complex64::from_polar(1.0, 2.0 * PI * (f - f_ref) * tau))
        .collect()
}

/// Cable delay from the phase slope of the outer tenth of the trace on
/// each side, where the resonance contributes little phase.
fn initial_delay(freqs: &[f64], z: &[Complex64]) -> f64 {
    let phase = unwrap_phase(&z.iter().map(|s| s.arg()).collect::<Vec<_>>());
    let n = freqs.len();
    let edge = (n / 10).max(3);
    let idx: Vec<usize> = (0..edge).chain(n - edge..n).collect();
    let m = idx.len() as f64;
    let fm = idx.iter().map(|&i| freqs[i]).sum::<f64>() / m;
    let pm = idx.iter().map(|&i| phase[i]).sum::<f64>() / m;
    let sxy: f64 = idx.iter().map(|&i| (freqs[i] - fm) * (phase[i] - pm)).sum();
    let sxx: f64 = idx.iter().map(|&i| (freqs[i] - fm).powi(2)).sum();
    -sxy / sxx / (2.0 * PI)
}

fn delay_cost(freqs: &[f64], z: &[Complex64], f_ref: f64, tau: f64) -> f64 {
    let zc = remove_delay(freqs, z, f_ref, tau);
    match taubin_fit(&zc) {
        Some(c) => c.residual(&zc),
        None => f64::INFINITY,
    }
}

/// Minimizes the circle-fit residual over τ: a coarse scan around the
/// phase-slope estimate followed by golden-section refinement.
fn refine_delay(freqs: &[f64], z: &[Complex64], f_ref: f64, tau0: f64) -> f64 {
    let span = freqs[freqs.len() - 1] - freqs[0];
    let half = 1.0 / span;
    let steps = 80;
    let step = 2.0 * half / steps as f64;
    let cost = |t: f64| delay_cost(freqs, z, f_ref, t);
    let (mut best_t, mut best_c) = (tau0, cost(tau0));
    for k in 0..=steps {
        let t = tau0 - half + step * k as f64;
        let c = cost(t);
        if c < best_c {
            best_t = t;
            best_c = c;
        }
    }
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best_t - step, best_t + step);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut c1, mut c2) = (cost(x1), cost(x2));
    for _ in 0..60 {
        if c1 < c2 {
            b = x2;
            x2 = x1;
            c2 = c1;
            x1 = b - golden * (b - a);
            c1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            c1 = c2;
            x2 = a + golden * (b - a);
            c2 = cost(x2);
        }
    }
    let t = 0.5 * (a + b);
    if cost(t) <= best_c {
        t
    } else {
        best_t
    }
}

/// Angle about the circle center: θ(f) = θ₀ + 2·atan(2Q_l(1 − f/f_r)).
struct PhaseProblem<'a> {
    freqs: &'a [f64],
    theta: Vec<f64>,
    f_ref: f64,
    span: f64,
}

impl PhaseProblem<'_> {
    fn f_res(&self, v: f64) -> f64 {
        self.f_ref + v * self.span
    }
}

impl LeastSquaresProblem for PhaseProblem<'_> {
    fn num_params(&self) -> usize {
        3
    }

    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let (theta0, q_l, f_r) = (x[0], x[1].exp(), self.f_res(x[2]));
        Some(DVector::from_fn(self.freqs.len(), |i, _| {
            let model = theta0 + 2.0 * (2.0 * q_l * (1.0 - self.freqs[i] / f_r)).atan();
            wrap(self.theta[i] - model)
        }))
    }
}

/// Weighted complex residuals of the full seven-parameter model.
///
/// Coordinates: f_r as ppm offset from the reference frequency, ln Q_l,
/// ln |Q_c|, φ₀, ln a, the environment phase at the reference frequency,
/// and τ in nanoseconds.
pub struct NotchProblem<'a> {
    freqs: &'a [f64],
    z: &'a [Complex64],
    f_ref: f64,
    /// √wᵢ/σ per point.
    scale: Vec<f64>,
}

impl<'a> NotchProblem<'a> {
    pub fn new(freqs: &'a [f64], z: &'a [Complex64], f_ref: f64, scale: Vec<f64>) -> Self {
        Self {
            freqs,
            z,
            f_ref,
            scale,
        }
    }

    pub fn internal(&self, p: &NotchModelParams) -> DVector<f64> {
        DVector::from_vec(vec![
            (p.f_res / self.f_ref - 1.0) * 1e6,
            p.q_l.ln(),
            p.q_c_mag.ln(),
            p.phi0,
            p.amp.ln(),
            p.alpha_env - 2.0 * PI * self.f_ref * p.tau,
            p.tau * 1e9,
        ])
    }

    pub fn physical(&self, x: &DVector<f64>) -> NotchModelParams {
        let tau = x[6] * 1e-9;
        NotchModelParams {
            f_res: self.f_ref * (1.0 + 1e-6 * x[0]),
            q_l: x[1].exp(),
            q_c_mag: x[2].exp(),
            phi0: x[3],
            amp: x[4].exp(),
            alpha_env: wrap(x[5] + 2.0 * PI * self.f_ref * tau),
            tau,
        }
    }

    /// Model value and its derivatives with respect to the coordinates.
    fn eval(&self, x: &DVector<f64>, i: usize) -> (Complex64, [Complex64; 7]) {
        let f = self.freqs[i];
        let f_r = self.f_ref * (1.0 + 1e-6 * x[0]);
        let q_l = x[1].exp();
        let k = q_l * (-x[2]).exp();
        let rot = Complex64::from_polar(1.0, x[3]);
        let df = f - self.f_ref;
        let env = Complex64::from_polar(x[4].exp(), x[5] - 2.0 * PI * df * x[6] * 1e-9);
        let detune = 2.0 * q_l * (f / f_r - 1.0);
        let d = Complex64::new(1.0, detune);
        let term = k * rot / d;
        let s = env * (1.0 - term);
        let i_unit = Complex64::i();
        let dd_dfr = i_unit * (-2.0 * q_l * f / (f_r * f_r)) * self.f_ref * 1e-6;
        let grads = [
            env * term * dd_dfr / d,
            -env * (term - term * i_unit * detune / d),
            env * term,
            -env * i_unit * term,
            s,
            i_unit * s,
            -i_unit * 2.0 * PI * df * 1e-9 * s,
        ];
        (s, grads)
    }
}

impl LeastSquaresProblem for NotchProblem<'_> {
    fn num_params(&self) -> usize {
        7
    }

    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.freqs.len();
        let mut r = DVector::zeros(2 * n);
        for i in 0..n {
            let (s, _) = self.eval(x, i);
            let d = (s - self.z[i]) * self.scale[i];
            r[2 * i] = d.re;
            r[2 * i + 1] = d.im;
        }
        Some(r)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.freqs.len();
        let mut j = DMatrix::zeros(2 * n, 7);
        for i in 0..n {
            let (_, g) = self.eval(x, i);
            for (k, gk) in g.iter().enumerate() {
                j[(2 * i, k)] = gk.re * self.scale[i];
                j[(2 * i + 1, k)] = gk.im * self.scale[i];
            }
        }
        Some(j)
    }
}

/// Resonance point estimate: the data point nearest the circle point
/// opposite the off-resonance baseline seen at the trace edges.
fn resonance_index(z: &[Complex64], circle: &Circle) -> (usize, Complex64) {
    let n = z.len();
    let edge = (n / 20).max(2);
    let baseline = z[..edge].iter().chain(&z[n - edge..]).sum::<Complex64>() / (2 * edge) as f64;
    let dir = (baseline - circle.center) / (baseline - circle.center).norm();
    let opposite = circle.center - circle.radius * dir;
    let k = (0..n)
        .min_by(|&a, &b| {
            (z[a] - opposite)
                .norm()
                .total_cmp(&(z[b] - opposite).norm())
        })
        .expect("non-empty");
    (k, opposite)
}

/// Circle-fit extraction of f_r, Q_l, |Q_c|, φ₀, environment and Q_i.
///
/// Steps: noise estimate; cable delay from the edge phase slope, refined
/// by minimizing the circle residual; algebraic circle fit; arctangent
/// fit of the angle about the center for f_r and Q_l; normalization by
/// the off-resonance point for a, α, φ₀ and |Q_c|; and a weighted
/// least-squares polish of all seven parameters, with weights inversely
/// proportional to the distance from resonance and capped at 10:1.
pub fn fit_circle(trace: &ComplexTrace) -> Result<CircleFitResult, CircleFitError> {
    trace.validate()?;
    let freqs = &trace.freqs;
    let n = freqs.len();
    let span = freqs[n - 1] - freqs[0];
    let f_ref = 0.5 * (freqs[0] + freqs[n - 1]);
    let noise = estimate_noise(&trace.s21);

    let tau0 = initial_delay(freqs, &trace.s21);
    let tau = refine_delay(freqs, &trace.s21, f_ref, tau0);
    let z = remove_delay(freqs, &trace.s21, f_ref, tau);
    let circle = taubin_fit(&z)
        .ok_or_else(|| CircleFitError::NonConvergence("algebraic circle fit failed".into()))?;
    if circle.radius < 5.0 * noise {
        if excess_scatter(&z, noise) < FEATURE_SCATTER_RATIO {
            return Err(CircleFitError::OffResonance(
                "no resonance feature above the noise".into(),
            ));
        }
        return Err(CircleFitError::DegenerateCircle {
            radius: circle.radius,
            noise,
        });
    }

    let (k_res, opposite) = resonance_index(&z, &circle);
    if k_res < 2 || k_res + 2 >= n {
        return Err(CircleFitError::OffResonance(format!(
            "resonance estimate at the trace edge ({} Hz)",
            freqs[k_res]
        )));
    }

    // phase fit about the circle center
    let phase = PhaseProblem {
        freqs,
        theta: z.iter().map(|s| (s - circle.center).arg()).collect(),
        f_ref,
        span,
    };
    let theta0 = (opposite - circle.center).arg();
    let v0 = (freqs[k_res] - f_ref) / span;
    let phase_bounds = Bounds::new(
        vec![f64::NEG_INFINITY, 0.0, -0.5],
        vec![f64::INFINITY, (1e12f64).ln(), 0.5],
    );
    let mut best_phase = None;
    for widths in [0.5, 2.0, 8.0, 32.0, 128.0] {
        let q0 = (freqs[k_res] / span * widths).max(1.0);
        if let Ok(rep) = lm_minimize(
            &phase,
            &[theta0, q0.ln(), v0],
            &phase_bounds,
            &LmOptions::default(),
        ) {
            if best_phase
                .as_ref()
                .map_or(true, |b: &crate::sweepfit::lm::LmReport| rep.cost < b.cost)
            {
                best_phase = Some(rep);
            }
        }
    }
    let phase_fit =
        best_phase.ok_or_else(|| CircleFitError::NonConvergence("phase fit failed".into()))?;
    let theta0 = phase_fit.params[0];
    let q_l = phase_fit.params[1].exp();
    let f_r = phase.f_res(phase_fit.params[2]);

    // off-resonance point and normalization
    let off = circle.center + Complex64::from_polar(circle.radius, theta0 + PI);
    let amp = off.norm();
    let c_n = circle.center / off;
    let r_n = circle.radius / amp;
    let seed = NotchModelParams {
        f_res: f_r,
        q_l,
        q_c_mag: q_l / (2.0 * r_n),
        phi0: wrap((1.0 - c_n).arg()),
        amp,
        alpha_env: wrap(off.arg() + 2.0 * PI * f_ref * tau),
        tau,
    };

    // weighted polish
    let sigma = noise.max(1e-15 * amp);
    let dist: Vec<f64> = freqs.iter().map(|f| (f - f_r).abs()).collect();
    let dmax = dist.iter().cloned().fold(0.0, f64::max);
    let scale = dist
        .iter()
        .map(|d| (dmax / d.clamp(dmax / 10.0, dmax)).sqrt() / sigma)
        .collect();
    let problem = NotchProblem::new(freqs, &trace.s21, f_ref, scale);
    let lower_u = (freqs[0] / f_ref - 1.0) * 1e6;
    let upper_u = (freqs[n - 1] / f_ref - 1.0) * 1e6;
    let inf = f64::INFINITY;
    let bounds = Bounds::new(
        vec![lower_u, 0.0, 0.0, -PI, -inf, -inf, -inf],
        vec![upper_u, 1e12f64.ln(), 1e12f64.ln(), PI, inf, inf, inf],
    );
    let x0 = problem.internal(&seed);
    let options = LmOptions {
        absolute_sigma: false,
        acceptance_tolerance: 1e-4,
        ..LmOptions::default()
    };
    let rep = lm_minimize(&problem, x0.as_slice(), &bounds, &options)
        .map_err(|e| CircleFitError::NonConvergence(e.to_string()))?;
    if !rep.converged {
        return Err(CircleFitError::NonConvergence(format!(
            "{:?} after {} iterations, gradient {:e}",
            rep.termination, rep.iterations, rep.gradient_measure
        )));
    }
    let x = DVector::from_column_slice(&rep.params);
    let params = problem.physical(&x);
    if params.f_res <= freqs[0] || params.f_res >= freqs[n - 1] {
        return Err(CircleFitError::OffResonance(format!(
            "fitted f_res {} Hz outside the trace",
            params.f_res
        )));
    }
    let inverse_q_i = params.inverse_q_i();
    if !(inverse_q_i > 0.0) {
        return Err(CircleFitError::NonPositiveQi { inverse_q_i });
    }
    let q_i = 1.0 / inverse_q_i;

    let cov = rep.covariance.as_ref().expect("covariance computed");
    let sd = |c: &[f64]| Some(cov.variance_of(c).sqrt()).filter(|v| v.is_finite());
    let unit = |k: usize| {
        let mut c = [0.0; 7];
        c[k] = 1.0;
        c
    };
    let (cos, sin) = (params.phi0.cos(), params.phi0.sin());
    // ∂(1/Q_i) along ln Q_l, ln |Q_c|, φ₀
    let dinv = [
        0.0,
        -1.0 / params.q_l,
        cos / params.q_c_mag,
        sin / params.q_c_mag,
        0.0,
        0.0,
        0.0,
    ];
    let stderr = NotchStderr {
        f_res: sd(&unit(0)).map(|s| s * f_ref * 1e-6),
        q_l: sd(&unit(1)).map(|s| s * params.q_l),
        q_c_mag: sd(&unit(2)).map(|s| s * params.q_c_mag),
        phi0: sd(&unit(3)),
        amp: sd(&unit(4)).map(|s| s * params.amp),
        alpha_env: sd(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0 * PI * f_ref * 1e-9]),
        tau: sd(&unit(6)).map(|s| s * 1e-9),
        q_i: sd(&dinv).map(|s| s * q_i * q_i),
    };
    let rms_residual = (freqs
        .iter()
        .zip(&trace.s21)
        .map(|(f, s)| (params.s21(*f) - s).norm_sqr())
        .sum::<f64>()
        / n as f64)
        .sqrt();

    Ok(CircleFitResult {
        resonator_id: trace.resonator_id.clone(),
        params,
        q_i,
        stderr,
        rms_residual,
        noise_sigma: noise,
        snr: params.amp * params.q_l / (2.0 * params.q_c_mag) / sigma,
        iterations: rep.iterations,
        converged: rep.converged,
        drive_power_dbm: trace.drive_power_dbm,
        temperature_k: trace.temperature_k,
    })
}
