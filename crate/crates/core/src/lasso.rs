//! Cyclic coordinate descent for the lasso
//!
//! ```text
//! min_β  ‖r − Aβ‖₂² + λ‖β‖₁
//! ```
//!
//! plus a Gram-form variant used by the precision-matrix solver, where only
//! `A'A` and `A'r` are available.

use nalgebra::{DMatrix, DVector};

use crate::error::{GaqqError, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// `sign(z) · max(|z| − gamma, 0)`; exact ties resolve to zero.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    pub design: &'a DMatrix<f64>,
    pub response: &'a DVector<f64>,
    pub penalty: f64,
    pub warm_start: Option<&'a DVector<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> LassoProblem<'a> {
    pub fn new(design: &'a DMatrix<f64>, response: &'a DVector<f64>, penalty: f64) -> Self {
        Self {
            design,
            response,
            penalty,
            warm_start: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_warm_start(mut self, beta: &'a DVector<f64>) -> Self {
        self.warm_start = Some(beta);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self) -> Result<()> {
        let (m, q) = self.design.shape();
        if self.response.len() != m {
            return Err(GaqqError::invalid(format!(
                "design has {m} rows but response has length {}",
                self.response.len()
            )));
        }
        if let Some(w) = self.warm_start {
            if w.len() != q {
                return Err(GaqqError::invalid(format!(
                    "warm start has length {} but design has {q} columns",
                    w.len()
                )));
            }
        }
        if !(self.penalty >= 0.0) || !self.penalty.is_finite() {
            return Err(GaqqError::invalid("lasso penalty must be finite and >= 0"));
        }
        if !(self.tol > 0.0) {
            return Err(GaqqError::invalid("lasso tolerance must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(GaqqError::invalid("lasso max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub beta: DVector<f64>,
    /// Number of completed coordinate sweeps.
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

pub fn lasso_objective(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    penalty: f64,
    beta: &DVector<f64>,
) -> f64 {
    let resid = response - design * beta;
    resid.norm_squared() + penalty * beta.lp_norm(1)
}

/// Solves the lasso by cyclic coordinate descent with residual updates.
///
/// Stops once the largest coordinate change in a sweep is at most `tol`;
/// hitting `max_iter` returns the current iterate with `converged = false`.
pub fn solve_lasso(problem: &LassoProblem<'_>) -> Result<LassoSolution> {
    problem.validate()?;
    let a = problem.design;
    let q = a.ncols();
    let half_penalty = 0.5 * problem.penalty;

    let col_norms: Vec<f64> = (0..q).map(|j| a.column(j).norm_squared()).collect();
    let mut beta = match problem.warm_start {
        Some(w) => w.clone(),
        None => DVector::zeros(q),
    };
    for j in 0..q {
        if col_norms[j] == 0.0 {
            beta[j] = 0.0;
        }
    }
    let mut resid = problem.response - a * &beta;

    let mut converged = false;
    let mut iterations = 0;
    while iterations < problem.max_iter {
        iterations += 1;
        let mut max_change = 0.0_f64;
        for j in 0..q {
            let norm = col_norms[j];
            if norm == 0.0 {
                continue;
            }
            let col = a.column(j);
            let old = beta[j];
            let z = col.dot(&resid) + norm * old;
            let new = soft_threshold(z, half_penalty) / norm;
            let delta = new - old;
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= problem.tol {
            converged = true;
            break;
        }
    }

    let objective = lasso_objective(a, problem.response, problem.penalty, &beta);
    Ok(LassoSolution {
        beta,
        iterations,
        converged,
        objective,
    })
}

/// Largest violation of the lasso optimality conditions at `beta`, in the
/// same units as the gradient `2A'(Aβ − r)`.
pub fn lasso_kkt_residual(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    penalty: f64,
    beta: &DVector<f64>,
) -> f64 {
    let grad = design.transpose() * (design * beta - response) * 2.0;
    let mut worst = 0.0_f64;
    for j in 0..beta.len() {
        let v = if beta[j] != 0.0 {
            (grad[j] + penalty * beta[j].signum()).abs()
        } else {
            (grad[j].abs() - penalty).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Coordinate descent on the Gram form
///
/// ```text
/// min_θ  θ'Qθ + 2b'θ + 2ρ‖θ‖₁
/// ```
///
/// updating `theta` in place. Coordinates with `Q_jj <= 0` are pinned to zero.
/// Returns `(sweeps, converged)`.
pub(crate) fn solve_gram_lasso(
    gram: &DMatrix<f64>,
    linear: &DVector<f64>,
    rho: f64,
    theta: &mut DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (usize, bool) {
    let q = theta.len();
    for j in 0..q {
        if gram[(j, j)] <= 0.0 {
            theta[j] = 0.0;
        }
    }
    let mut q_theta = gram * &*theta;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..q {
            let qjj = gram[(j, j)];
            if qjj <= 0.0 {
                continue;
            }
            let old = theta[j];
            let g = q_theta[j] - qjj * old + linear[j];
            let new = -soft_threshold(g, rho) / qjj;
            let delta = new - old;
            if delta != 0.0 {
                theta[j] = new;
                q_theta.axpy(delta, &gram.column(j), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= tol {
            return (sweeps, true);
        }
    }
    (sweeps, false)
}
