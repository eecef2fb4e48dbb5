//! Bounded Levenberg–Marquardt for small dense least-squares problems.
//!
//! Minimizes ½‖r(x)‖² subject to box constraints. Bounds are handled by
//! projecting each trial point onto the box, and the convergence test uses
//! the projected gradient, so a parameter pinned at a bound does not keep
//! the iteration alive. A step is accepted only if it lowers the cost, so
//! the cost sequence is monotone non-increasing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A residual vector and (optionally) its Jacobian.
pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;

    /// Residuals at `x`, or `None` if the model cannot be evaluated there.
    fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>>;

    /// Jacobian ∂rᵢ/∂xⱼ. The default is a central finite difference.
    fn jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        numerical_jacobian(|p| self.residuals(p), x)
    }
}

/// Central-difference Jacobian with step ε^(1/3)·max(|x|, 1).
pub fn numerical_jacobian(
    f: impl Fn(&DVector<f64>) -> Option<DVector<f64>>,
    x: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let r0 = f(x)?;
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let h = f64::EPSILON.cbrt() * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Some(jac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    fn project(&self, x: &mut DVector<f64>) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    /// Largest allowed |J_jᵀr| / (‖J_j‖·max(‖r‖, 1)) over free parameters.
    /// For ‖r‖ ≥ 1 this is the cosine between r and each Jacobian column.
    pub gradient_tolerance: f64,
    /// Gradient measure below which a stalled iteration still counts as
    /// converged; rounding in the residuals keeps it above `gradient_tolerance`.
    pub acceptance_tolerance: f64,
    /// Relative step size below which the iteration stops.
    pub step_tolerance: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Residuals are already divided by their standard deviations, so the
    /// covariance is (JᵀJ)⁻¹ without rescaling by the reduced χ².
    pub absolute_sigma: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-10,
            acceptance_tolerance: 1e-6,
            step_tolerance: 1e-12,
            max_iterations: 500,
            initial_damping: 1e-3,
            absolute_sigma: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroResidual,
    Gradient,
    StepSize,
    MaxIterations,
    /// The damping grew without finding a lower cost.
    NoProgress,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmError {
    #[error("residuals are not finite at the initial point")]
    NonFiniteInitial,
    #[error("Jacobian could not be evaluated at iteration {iteration}")]
    NonFiniteJacobian { iteration: usize },
    #[error("Jacobian is singular (condition number {condition_number:e})")]
    SingularJacobian { condition_number: f64 },
    #[error("problem has {residuals} residuals for {params} parameters")]
    Underdetermined { residuals: usize, params: usize },
    #[error("bounds have {got} entries, expected {expected}")]
    BoundsMismatch { expected: usize, got: usize },
}

/// Outcome of a least-squares minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// One-sigma uncertainties in the fit coordinates; `inf` along
    /// directions the data do not constrain.
    pub stderr: Vec<f64>,
    /// ½‖r‖².
    pub cost: f64,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Scaled projected-gradient measure at the solution.
    pub gradient_measure: f64,
    /// Condition number of JᵀJ at the solution.
    pub condition_number: f64,
    #[serde(skip)]
    pub covariance: Option<Covariance>,
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

fn projected_gradient_measure(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    x: &DVector<f64>,
    bounds: &Bounds,
) -> f64 {
    // below unit residual norm the fit is exact at the σ scale, and the
    // cosine would only measure rounding noise
    let rnorm = r.norm().max(1.0);
    let g = jac.transpose() * r;
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        // descent direction is −g
        let blocked =
            (x[j] <= bounds.lower[j] && g[j] > 0.0) || (x[j] >= bounds.upper[j] && g[j] < 0.0);
        if blocked {
            continue;
        }
        let cn = jac.column(j).norm();
        if cn > 0.0 {
            worst = worst.max(g[j].abs() / (cn * rnorm));
        }
    }
    worst
}

/// Parameter covariance split into a finite part and unconstrained
/// directions.
///
/// Singular values of J below 1e-10 of the largest are treated as zero.
/// Their right singular vectors span the directions the data cannot
/// resolve; any linear combination with a component along them has
/// infinite variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub finite: DMatrix<f64>,
    pub null_directions: Vec<DVector<f64>>,
    /// Condition number of JᵀJ.
    pub condition_number: f64,
}

impl Covariance {
    pub fn from_jacobian(jac: &DMatrix<f64>) -> Self {
        let n = jac.ncols();
        let svd = jac.clone().svd(false, true);
        let v_t = svd.v_t.expect("v_t requested");
        let s = &svd.singular_values;
        let s_max = s.max();
        let s_min = if s.len() < n { 0.0 } else { s.min() };
        let condition_number = if s_min > 0.0 {
            (s_max / s_min).powi(2)
        } else {
            f64::INFINITY
        };
        let cutoff = s_max * 1e-10;
        let mut finite = DMatrix::zeros(n, n);
        let mut null_directions = Vec::new();
        for k in 0..s.len() {
            let v = v_t.row(k).transpose();
            if s[k] > cutoff {
                finite += &v * v.transpose() / (s[k] * s[k]);
            } else {
                null_directions.push(v);
            }
        }
        Self {
            finite,
            null_directions,
            condition_number,
        }
    }

    /// Variance of cᵀx.
    pub fn variance_of(&self, c: &[f64]) -> f64 {
        let c = DVector::from_column_slice(c);
        let scale = c.norm();
        if self
            .null_directions
            .iter()
            .any(|v| v.dot(&c).abs() > 1e-6 * scale)
        {
            return f64::INFINITY;
        }
        c.dot(&(&self.finite * &c))
    }

    pub fn variance(&self, i: usize) -> f64 {
        let mut c = vec![0.0; self.finite.nrows()];
        c[i] = 1.0;
        self.variance_of(&c)
    }
}

/// Bounded Levenberg–Marquardt minimization of ½‖r(x)‖².
pub fn lm_minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: &[f64],
    bounds: &Bounds,
    options: &LmOptions,
) -> Result<LmReport, LmError> {
    let n = problem.num_params();
    if bounds.lower.len() != n || bounds.upper.len() != n || initial.len() != n {
        return Err(LmError::BoundsMismatch {
            expected: n,
            got: bounds
                .lower
                .len()
                .min(bounds.upper.len())
                .min(initial.len()),
        });
    }
    let mut x = DVector::from_column_slice(initial);
    bounds.project(&mut x);
    let mut r = problem
        .residuals(&x)
        .filter(|r| r.iter().all(|v| v.is_finite()))
        .ok_or(LmError::NonFiniteInitial)?;
    let m = r.len();
    if m < n {
        return Err(LmError::Underdetermined {
            residuals: m,
            params: n,
        });
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut history = vec![cost];

    let finite_jac = |x: &DVector<f64>, iteration| {
        problem
            .jacobian(x)
            .filter(|j| j.iter().all(|v| v.is_finite()))
            .ok_or(LmError::NonFiniteJacobian { iteration })
    };

    let mut jac = finite_jac(&x, 0)?;
    if jac.iter().all(|v| *v == 0.0) {
        return Err(LmError::SingularJacobian {
            condition_number: f64::INFINITY,
        });
    }

    let mut scale = DVector::from_fn(n, |j, _| jac.column(j).norm().max(1e-300));
    let mut lambda = options.initial_damping;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    'outer: while iterations < options.max_iterations {
        if cost == 0.0 {
            termination = Termination::ZeroResidual;
            break;
        }
        if projected_gradient_measure(&jac, &r, &x, bounds) <= options.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        for j in 0..n {
            scale[j] = scale[j].max(jac.column(j).norm());
        }

        // parameters held at a bound by the gradient are frozen for this step
        let free: Vec<usize> = (0..n)
            .filter(|&j| {
                !((x[j] <= bounds.lower[j] && g[j] > 0.0)
                    || (x[j] >= bounds.upper[j] && g[j] < 0.0))
            })
            .collect();

        loop {
            let k = free.len();
            let mut a = DMatrix::from_fn(k, k, |i, j| jtj[(free[i], free[j])]);
            for (i, &j) in free.iter().enumerate() {
                a[(i, i)] += lambda * scale[j] * scale[j];
            }
            let rhs = DVector::from_fn(k, |i, _| -g[free[i]]);
            let step = match a.cholesky() {
                Some(ch) => {
                    let reduced = ch.solve(&rhs);
                    let mut full = DVector::zeros(n);
                    for (i, &j) in free.iter().enumerate() {
                        full[j] = reduced[i];
                    }
                    full
                }
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e30 {
                        termination = Termination::NoProgress;
                        break 'outer;
                    }
                    continue;
                }
            };
            let mut trial = &x + &step;
            bounds.project(&mut trial);
            let actual_step = &trial - &x;
            let small_step =
                actual_step.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance);

            let trial_r = problem
                .residuals(&trial)
                .filter(|r| r.iter().all(|v| v.is_finite()));
            if let Some(tr) = trial_r {
                let trial_cost = 0.5 * tr.norm_squared();
                if trial_cost <= cost {
                    let predicted =
                        -(g.dot(&actual_step) + 0.5 * actual_step.dot(&(&jtj * &actual_step)));
                    let rho = if predicted > 0.0 {
                        (cost - trial_cost) / predicted
                    } else {
                        0.5
                    };
                    lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                    lambda = lambda.max(1e-20);
                    nu = 2.0;
                    x = trial;
                    r = tr;
                    cost = trial_cost;
                    history.push(cost);
                    jac = finite_jac(&x, iterations)?;
                    if small_step {
                        termination = Termination::StepSize;
                        break 'outer;
                    }
                    break;
                }
            }
            if small_step {
                termination = Termination::StepSize;
                break 'outer;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e30 {
                termination = Termination::NoProgress;
                break 'outer;
            }
        }
    }

    let gradient_measure = projected_gradient_measure(&jac, &r, &x, bounds);
    if termination != Termination::Gradient && cost == 0.0 {
        termination = Termination::ZeroResidual;
    }
    let converged = gradient_measure
        <= options.gradient_tolerance.max(options.acceptance_tolerance)
        && bounds.contains(x.as_slice());
    let chi_square = 2.0 * cost;
    let dof = (m - n).max(1) as f64;
    let reduced_chi_square = chi_square / dof;
    let mut cov = Covariance::from_jacobian(&jac);
    if !options.absolute_sigma {
        cov.finite *= reduced_chi_square;
    }
    let condition_number = cov.condition_number;
    let stderr = (0..n).map(|i| cov.variance(i).sqrt()).collect();

    Ok(LmReport {
        params: x.as_slice().to_vec(),
        stderr,
        cost,
        chi_square,
        reduced_chi_square,
        iterations,
        converged,
        termination,
        gradient_measure,
        condition_number,
        covariance: Some(cov),
        cost_history: history,
    })
}
