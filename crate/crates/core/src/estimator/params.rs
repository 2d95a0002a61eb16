use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GaqqError, Result};
use crate::numerics::{inv_spd, log_det_spd, SymMatrix, DEFAULT_EIG_FLOOR};
use crate::{glasso, lasso};

/// Penalties, outer-loop convergence thresholds and inner solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Off-diagonal ℓ1 penalty on the precision matrix (scatter scale).
    pub lambda1: f64,
    /// ℓ1 penalty on the mean differences.
    pub lambda2: f64,
    /// Outer convergence on `‖C_t − C_{t−1}‖_F²`.
    pub tau1: f64,
    /// Outer convergence on `‖δ_t − δ_{t−1}‖₂²` (summed over classes).
    pub tau2: f64,
    pub max_outer: usize,
    pub glasso_tol: f64,
    pub glasso_max_iter: usize,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub eig_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            tau1: 1e-6,
            tau2: 1e-6,
            max_outer: 100,
            glasso_tol: glasso::DEFAULT_TOL,
            glasso_max_iter: glasso::DEFAULT_MAX_ITER,
            lasso_tol: lasso::DEFAULT_TOL,
            lasso_max_iter: lasso::DEFAULT_MAX_ITER,
            eig_floor: DEFAULT_EIG_FLOOR,
        }
    }
}

impl Hyperparams {
    pub fn with_penalties(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lambda1) || !finite_nonneg(self.lambda2) {
            return Err(GaqqError::invalid("penalties must be finite and >= 0"));
        }
        let positive = [self.tau1, self.tau2, self.glasso_tol, self.lasso_tol];
        if positive.iter().any(|&v| !(v > 0.0)) {
            return Err(GaqqError::invalid("tolerances must be > 0"));
        }
        if self.max_outer == 0 || self.glasso_max_iter == 0 || self.lasso_max_iter == 0 {
            return Err(GaqqError::invalid("iteration caps must be positive"));
        }
        if !finite_nonneg(self.eig_floor) {
            return Err(GaqqError::invalid("eig_floor must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Per-iteration record of the alternating fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    /// Penalized objective after each outer iteration.
    pub objective: Vec<f64>,
    /// `‖C_t − C_{t−1}‖_F²`; infinite on the first iteration.
    pub c_change: Vec<f64>,
    /// `‖δ_t − δ_{t−1}‖₂²` summed over classes.
    pub delta_change: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Fitted class means, shared precision/covariance and class priors.
///
/// Mean differences use the K-class convention `K·δ_k = μ_k − μ_1`
/// (`k = 2..K`); for two classes that is `δ_2 = (μ_2 − μ_1)/2`, the negative
/// of the two-class half-gap returned by [`ModelParams::two_class_delta`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    mu: Vec<DVector<f64>>,
    c_hat: SymMatrix,
    sigma_hat: SymMatrix,
    pi: Vec<f64>,
    delta: Vec<DVector<f64>>,
    log_det_c: f64,
    reg_coef: DVector<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ModelParams {
    pub fn new(mu: Vec<DVector<f64>>, c_hat: SymMatrix, pi: Vec<f64>) -> Result<Self> {
        let k = mu.len();
        if k < 2 {
            return Err(GaqqError::invalid("model needs at least two classes"));
        }
        let p = c_hat.dim();
        if p < 2 {
            return Err(GaqqError::invalid("model dimension must be >= 2"));
        }
        if mu.iter().any(|m| m.len() != p) {
            return Err(GaqqError::invalid("class mean length differs from precision dimension"));
        }
        if mu.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(GaqqError::invalid("class means must be finite"));
        }
        if pi.len() != k {
            return Err(GaqqError::invalid("need one prior per class"));
        }
        if pi.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(GaqqError::invalid("class priors must be positive"));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GaqqError::invalid(format!("class priors sum to {total}, not 1")));
        }
        let log_det_c = log_det_spd(&c_hat)?;
        let sigma_hat = inv_spd(&c_hat)?;
        let kf = k as f64;
        let delta = mu[1..].iter().map(|m| (m - &mu[0]) / kf).collect();
        let cm = c_hat.as_matrix();
        let c_yy = cm[(p - 1, p - 1)];
        let reg_coef = DVector::from_iterator(p - 1, (0..p - 1).map(|i| -cm[(i, p - 1)] / c_yy));
        Ok(Self {
            mu,
            c_hat,
            sigma_hat,
            pi,
            delta,
            log_det_c,
            reg_coef,
            lambda1: 0.0,
            lambda2: 0.0,
        })
    }

    pub fn with_penalties(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn p(&self) -> usize {
        self.c_hat.dim()
    }

    pub fn mu(&self) -> &[DVector<f64>] {
        &self.mu
    }

    /// Mean of class `k` (1-based).
    pub fn mu_k(&self, k: usize) -> &DVector<f64> {
        &self.mu[k - 1]
    }

    pub fn c_hat(&self) -> &SymMatrix {
        &self.c_hat
    }

    pub fn sigma_hat(&self) -> &SymMatrix {
        &self.sigma_hat
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `δ_k = (μ_k − μ_1)/K` for `k = 2..K`, stored at index `k − 2`.
    pub fn delta(&self) -> &[DVector<f64>] {
        &self.delta
    }

    /// Two-class half-gap `(μ_1 − μ_2)/2`.
    pub fn two_class_delta(&self) -> DVector<f64> {
        (&self.mu[0] - &self.mu[1]) * 0.5
    }

    pub fn log_det_c(&self) -> f64 {
        self.log_det_c
    }

    pub fn mu_x(&self, k: usize) -> DVector<f64> {
        self.mu[k - 1].rows(0, self.p() - 1).into_owned()
    }

    pub fn mu_y(&self, k: usize) -> f64 {
        self.mu[k - 1][self.p() - 1]
    }

    pub fn c_x(&self) -> DMatrix<f64> {
        let q = self.p() - 1;
        self.c_hat.as_matrix().view((0, 0), (q, q)).into_owned()
    }

    pub fn c_xy(&self) -> DVector<f64> {
        let q = self.p() - 1;
        self.c_hat.as_matrix().view((0, q), (q, 1)).column(0).into_owned()
    }

    /// The `c_y²` corner of the precision matrix.
    pub fn c_yy(&self) -> f64 {
        let q = self.p() - 1;
        self.c_hat.get(q, q)
    }

    pub fn sigma_x(&self) -> DMatrix<f64> {
        let q = self.p() - 1;
        self.sigma_hat.as_matrix().view((0, 0), (q, q)).into_owned()
    }

    pub fn sigma_xy(&self) -> DVector<f64> {
        let q = self.p() - 1;
        self.sigma_hat.as_matrix().view((0, q), (q, 1)).column(0).into_owned()
    }

    pub fn sigma_yy(&self) -> f64 {
        let q = self.p() - 1;
        self.sigma_hat.get(q, q)
    }

    /// `Σ_X⁻¹ Σ_Xy = −C_Xy / c_y²`, the slope of `E[y | x]`.
    pub fn regression_coef(&self) -> &DVector<f64> {
        &self.reg_coef
    }

    /// Marginal precision of `x`: `Σ_X⁻¹ = C_X − C_Xy C_Xy' / c_y²`.
    pub fn marginal_precision_x(&self) -> DMatrix<f64> {
        let cxy = self.c_xy();
        self.c_x() - (&cxy * cxy.transpose()) / self.c_yy()
    }
}
