//! Algebraic circle fit (Taubin, SVD formulation after Chernov).

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    /// Sum of squared radial deviations.
    pub fn residual(&self, points: &[Complex64]) -> f64 {
        points
            .iter()
            .map(|z| ((z - self.center).norm() - self.radius).powi(2))
            .sum()
    }
}

/// Fits a circle to points in the complex plane. Returns `None` for fewer
/// than three points or collinear data.
pub fn taubin_fit(points: &[Complex64]) -> Option<Circle> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let mean = points.iter().sum::<Complex64>() / n as f64;
    let centered: Vec<Complex64> = points.iter().map(|z| z - mean).collect();
    let z_mean = centered.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    if !(z_mean > 0.0) {
        return None;
    }
    let z_scale = 2.0 * z_mean.sqrt();
    let m = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => (centered[i].norm_sqr() - z_mean) / z_scale,
        1 => centered[i].re,
        _ => centered[i].im,
    });
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let k = svd.singular_values.imin();
    let a0 = v_t[(k, 0)] / z_scale;
    let (a1, a2) = (v_t[(k, 1)], v_t[(k, 2)]);
    if a0.abs() < 1e-300 {
        return None;
    }
    let a3 = -z_mean * a0;
    let center = Complex64::new(-a1 / (2.0 * a0), -a2 / (2.0 * a0)) + mean;
    let radius = (a1 * a1 + a2 * a2 - 4.0 * a0 * a3).sqrt() / (2.0 * a0.abs());
    radius.is_finite().then_some(Circle { center, radius })
}
