//! Penalized Gaussian likelihood for a sparse precision matrix:
//!
//! ```text
//! min_C  −n·ln|C| + tr(C·S̃) + λ₁ Σ_{i≠j} |c_ij|
//! ```
//!
//! `S̃` is a scatter matrix (a sum over `n` samples, not an average) and the
//! diagonal of `C` is never penalized.
//!
//! The solver works on the normalized problem `−ln|C| + tr(C·S) + ρ‖C‖₁`
//! with `S = S̃/n`, `ρ = λ₁/n`, which has the same minimizer. It sweeps over
//! columns, each time minimizing the primal objective exactly in the
//! (off-diagonal column, diagonal entry) block. With `A = (C₋ⱼ₋ⱼ)⁻¹` the
//! block problem reduces to the Gram-form lasso
//!
//! ```text
//! min_θ  s_jj·θ'Aθ + 2 s₋ⱼⱼ'θ + 2ρ‖θ‖₁,      c_jj = 1/s_jj + θ'Aθ
//! ```
//!
//! and the covariance estimate `W = C⁻¹` is kept current by the block
//! inverse formulas, so every column update is a descent step and `C` stays
//! positive definite throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{GaqqError, Result};
use crate::lasso::solve_gram_lasso;
use crate::numerics::{inv_spd, log_det_spd, SymMatrix};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;

const INNER_MAX_ITER: usize = 1_000;

#[derive(Debug, Clone)]
pub struct GlassoProblem<'a> {
    pub s_tilde: &'a SymMatrix,
    pub n: usize,
    pub lambda1: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting precision matrix; must be SPD when given.
    pub warm_start: Option<&'a SymMatrix>,
}

impl<'a> GlassoProblem<'a> {
    pub fn new(s_tilde: &'a SymMatrix, n: usize, lambda1: f64) -> Self {
        Self {
            s_tilde,
            n,
            lambda1,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            warm_start: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_warm_start(mut self, c: &'a SymMatrix) -> Self {
        self.warm_start = Some(c);
        self
    }

    /// `1 + ‖S̃‖_max`, the scale used by the optimality tolerance.
    pub fn kkt_scale(&self) -> f64 {
        1.0 + self.s_tilde.max_abs()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(GaqqError::invalid("glasso sample count must be >= 1"));
        }
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(GaqqError::invalid("lambda1 must be finite and >= 0"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(GaqqError::invalid("glasso tol and max_iter must be positive"));
        }
        if !self.s_tilde.is_finite() {
            return Err(GaqqError::invalid("scatter matrix has non-finite entries"));
        }
        let p = self.s_tilde.dim();
        for i in 0..p {
            let d = self.s_tilde.get(i, i);
            if d < 0.0 {
                return Err(GaqqError::invalid(format!(
                    "scatter matrix has negative diagonal entry {d} at {i}"
                )));
            }
            if d == 0.0 {
                return Err(GaqqError::NotPositiveDefinite(format!(
                    "scatter matrix has zero diagonal entry at {i}; the unpenalized diagonal of C is unbounded"
                )));
            }
        }
        if let Some(c) = self.warm_start {
            if c.dim() != p {
                return Err(GaqqError::invalid("warm start dimension mismatch"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GlassoSolution {
    pub c_hat: SymMatrix,
    pub sigma_hat: SymMatrix,
    /// Completed column sweeps (0 for the closed-form unpenalized case).
    pub iterations: usize,
    pub converged: bool,
}

/// Value of `−n·ln|C| + tr(C·S̃) + λ₁ Σ_{i≠j}|c_ij|`.
pub fn glasso_objective(c: &SymMatrix, s_tilde: &SymMatrix, n: usize, lambda1: f64) -> Result<f64> {
    let log_det = log_det_spd(c)?;
    Ok(-(n as f64) * log_det + c.trace_product(s_tilde) + lambda1 * off_diagonal_l1(c))
}

/// `Σ_{i≠j} |c_ij|` (each off-diagonal pair counted twice).
pub fn off_diagonal_l1(c: &SymMatrix) -> f64 {
    let m = c.as_matrix();
    let p = c.dim();
    let mut total = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                total += m[(i, j)].abs();
            }
        }
    }
    total
}

/// Largest violation of the stationarity conditions at `c`, using
/// `G = −n·C⁻¹ + S̃`. Zero for an exact minimizer.
pub fn glasso_kkt_residual(c: &SymMatrix, problem: &GlassoProblem<'_>) -> Result<f64> {
    let sigma = inv_spd(c)?;
    Ok(kkt_with_sigma(c, &sigma, problem))
}

fn kkt_with_sigma(c: &SymMatrix, sigma: &SymMatrix, problem: &GlassoProblem<'_>) -> f64 {
    let n = problem.n as f64;
    let lam = problem.lambda1;
    let p = c.dim();
    let cm = c.as_matrix();
    let sm = sigma.as_matrix();
    let st = problem.s_tilde.as_matrix();
    let mut worst = 0.0_f64;
    for j in 0..p {
        for i in j..p {
            let g = -n * sm[(i, j)] + st[(i, j)];
            let v = if i == j {
                g.abs()
            } else if cm[(i, j)] != 0.0 {
                (g + lam * cm[(i, j)].signum()).abs()
            } else {
                (g.abs() - lam).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

pub fn solve_glasso(problem: &GlassoProblem<'_>) -> Result<GlassoSolution> {
    problem.validate()?;
    let n = problem.n as f64;
    let p = problem.s_tilde.dim();

    if problem.lambda1 == 0.0 {
        // −n·C⁻¹ + S̃ = 0
        let sigma_scaled = inv_spd(problem.s_tilde).map_err(|_| {
            GaqqError::NotPositiveDefinite("unpenalized problem needs a positive definite scatter matrix".into())
        })?;
        let c_hat = SymMatrix::new(sigma_scaled.as_matrix() * n)?;
        let sigma_hat = inv_spd(&c_hat)?;
        return Ok(GlassoSolution {
            c_hat,
            sigma_hat,
            iterations: 0,
            converged: true,
        });
    }

    let s: DMatrix<f64> = problem.s_tilde.as_matrix() / n;
    let rho = problem.lambda1 / n;
    let target = problem.tol * problem.kkt_scale();
    let floor_tol = 1e-3 * problem.tol;

    let mut c: DMatrix<f64> = match problem.warm_start {
        Some(c0) => c0.as_matrix().clone(),
        None => DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                n / (problem.s_tilde.get(i, i) + problem.lambda1)
            } else {
                0.0
            }
        }),
    };
    let mut w = inv_spd(&SymMatrix::from_symmetric_unchecked(c.clone()))?.into_matrix();

    if p == 1 {
        c[(0, 0)] = 1.0 / s[(0, 0)];
        let c_hat = SymMatrix::from_symmetric_unchecked(c);
        let sigma_hat = inv_spd(&c_hat)?;
        return Ok(GlassoSolution {
            c_hat,
            sigma_hat,
            iterations: 1,
            converged: true,
        });
    }

    let m = p - 1;
    let mut others: Vec<usize> = Vec::with_capacity(m);
    let mut a = DMatrix::zeros(m, m);
    let mut w12 = DVector::zeros(m);
    let mut b = DVector::zeros(m);
    let mut theta = DVector::zeros(m);

    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < problem.max_iter {
        iterations += 1;
        let inner_tol = (1e-2 * last_change).clamp(floor_tol, 1e-2);
        let mut sweep_change = 0.0_f64;
        for j in 0..p {
            others.clear();
            others.extend((0..p).filter(|&i| i != j));
            let sjj = s[(j, j)];
            let wjj = w[(j, j)];
            for (li, &oi) in others.iter().enumerate() {
                w12[li] = w[(oi, j)];
                b[li] = s[(oi, j)] / sjj;
                theta[li] = c[(oi, j)];
            }
            // A = W₁₁ − w₁₂w₁₂'/w₂₂ = (C₁₁)⁻¹
            for (lc, &oc) in others.iter().enumerate() {
                let wc = w12[lc] / wjj;
                for (lr, &or) in others.iter().enumerate() {
                    a[(lr, lc)] = w[(or, oc)] - w12[lr] * wc;
                }
            }
            solve_gram_lasso(&a, &b, rho / sjj, &mut theta, inner_tol, INNER_MAX_ITER);

            let a_theta = &a * &theta;
            let new_w12 = &a_theta * (-sjj);
            c[(j, j)] = 1.0 / sjj + theta.dot(&a_theta);
            for (li, &oi) in others.iter().enumerate() {
                sweep_change = sweep_change.max((c[(oi, j)] - theta[li]).abs());
                c[(oi, j)] = theta[li];
                c[(j, oi)] = theta[li];
                w[(oi, j)] = new_w12[li];
                w[(j, oi)] = new_w12[li];
            }
            w[(j, j)] = sjj;
            // W₁₁ = A + w₁₂w₁₂'/s_jj
            for (lc, &oc) in others.iter().enumerate() {
                let wc = new_w12[lc] / sjj;
                for (lr, &or) in others.iter().enumerate() {
                    w[(or, oc)] = a[(lr, lc)] + new_w12[lr] * wc;
                }
            }
        }

        last_change = sweep_change;
        let c_sym = SymMatrix::from_symmetric_unchecked(c.clone());
        let w_sym = SymMatrix::from_symmetric_unchecked(w.clone());
        if kkt_with_sigma(&c_sym, &w_sym, problem) <= target {
            // confirm against a fresh inverse to rule out drift in W
            let fresh = inv_spd(&c_sym)?;
            if kkt_with_sigma(&c_sym, &fresh, problem) <= target {
                converged = true;
                break;
            }
            w = fresh.into_matrix();
        }
    }

    let c_hat = SymMatrix::new(c)?;
    let sigma_hat = inv_spd(&c_hat)?;
    Ok(GlassoSolution {
        c_hat,
        sigma_hat,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scatter(p: usize, n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(x.transpose() * x).unwrap()
    }

    #[test]
    fn unpenalized_is_scaled_inverse() {
        let s = random_scatter(4, 30, 1);
        let sol = solve_glasso(&GlassoProblem::new(&s, 30, 0.0)).unwrap();
        let expected = inv_spd(&s).unwrap().as_matrix() * 30.0;
        assert!(max_abs_diff(sol.c_hat.as_matrix(), &expected) < 1e-10);
        assert!(glasso_kkt_residual(&sol.c_hat, &GlassoProblem::new(&s, 30, 0.0)).unwrap() <= 1e-8);
    }

    #[test]
    fn unpenalized_singular_scatter_fails() {
        let s = random_scatter(6, 3, 2);
        assert!(matches!(
            solve_glasso(&GlassoProblem::new(&s, 3, 0.0)),
            Err(GaqqError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn diagonal_scatter_gives_diagonal_solution() {
        let s = SymMatrix::from_diagonal(&[2.0, 5.0, 0.5]);
        for lam in [0.1, 1.0, 10.0] {
            let sol = solve_glasso(&GlassoProblem::new(&s, 10, lam)).unwrap();
            let expected = DMatrix::from_diagonal(&DVector::from_column_slice(&[5.0, 2.0, 20.0]));
            assert!(max_abs_diff(sol.c_hat.as_matrix(), &expected) < 1e-9, "lam {lam}");
            assert!(sol.converged);
        }
    }

    #[test]
    fn kkt_detects_perturbation() {
        let s = random_scatter(3, 20, 5);
        let prob = GlassoProblem::new(&s, 20, 0.0);
        let sol = solve_glasso(&prob).unwrap();
        let mut m = sol.c_hat.as_matrix().clone();
        m[(0, 1)] += 0.1;
        m[(1, 0)] += 0.1;
        let perturbed = SymMatrix::new(m).unwrap();
        assert!(glasso_kkt_residual(&perturbed, &prob).unwrap() > 0.0);
    }

    #[test]
    fn singular_scatter_with_penalty_is_spd() {
        let s = random_scatter(10, 4, 7);
        let prob = GlassoProblem::new(&s, 4, 0.5);
        let sol = solve_glasso(&prob).unwrap();
        assert!(sol.converged);
        assert!(crate::numerics::cholesky_lower(&sol.c_hat).is_ok());
        let prod = sol.c_hat.as_matrix() * sol.sigma_hat.as_matrix();
        assert!(max_abs_diff(&prod, &DMatrix::identity(10, 10)) <= 1e-6);
        assert!(glasso_kkt_residual(&sol.c_hat, &prob).unwrap() <= 1e-6 * prob.kkt_scale());
    }

    #[test]
    fn zero_diagonal_is_rejected() {
        let s = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(solve_glasso(&GlassoProblem::new(&s, 5, 1.0)).is_err());
    }

    #[test]
    fn objective_non_increasing_over_sweeps() {
        let s = random_scatter(8, 12, 9);
        let lam = 0.7;
        let mut prev = f64::INFINITY;
        for sweeps in 1..15 {
            let prob = GlassoProblem::new(&s, 12, lam).with_max_iter(sweeps);
            let sol = solve_glasso(&prob).unwrap();
            let obj = glasso_objective(&sol.c_hat, &s, 12, lam).unwrap();
            assert!(obj <= prev + 1e-10 * prev.abs().max(1.0), "sweep {sweeps}: {obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn sparsity_monotone_in_lambda() {
        let s = random_scatter(10, 15, 12);
        let mut prev = usize::MAX;
        for lam in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let sol = solve_glasso(&GlassoProblem::new(&s, 15, lam)).unwrap();
            let m = sol.c_hat.as_matrix();
            let nnz = (0..10)
                .flat_map(|j| (0..10).map(move |i| (i, j)))
                .filter(|&(i, j)| i != j && m[(i, j)] != 0.0)
                .count();
            assert!(nnz <= prev, "lambda {lam}: {nnz} > {prev}");
            prev = nnz;
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let s = random_scatter(6, 20, 14);
        let cold = solve_glasso(&GlassoProblem::new(&s, 20, 1.0)).unwrap();
        let start = SymMatrix::identity(6);
        let warm = solve_glasso(&GlassoProblem::new(&s, 20, 1.0).with_warm_start(&start)).unwrap();
        assert!(max_abs_diff(cold.c_hat.as_matrix(), warm.c_hat.as_matrix()) < 1e-4);
    }
}
