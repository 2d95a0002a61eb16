//! Joint prediction of the response and the class label from predictors.
//!
//! For each class the response is predicted by its conditional mean given
//! `x`; the label is the class maximizing `π_k` times the joint density at
//! `(x, ŷ_k)`. All density comparisons are made in log space.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{GaqqError, Result};
use crate::estimator::{Dataset, ModelParams};
use crate::numerics::{pinv_sym, SymMatrix};

/// Eigenvalues below this fraction of the largest are dropped by the GLDA
/// pseudo-inverse.
pub const GLDA_PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub y_hat: f64,
    /// 1-based class label.
    pub z_hat: usize,
    pub per_class_y: Vec<f64>,
    pub per_class_score: Vec<f64>,
}

impl Prediction {
    fn from_scores(per_class_y: Vec<f64>, per_class_score: Vec<f64>) -> Self {
        let z_hat = argmax_first(&per_class_score) + 1;
        Self {
            y_hat: per_class_y[z_hat - 1],
            z_hat,
            per_class_y,
            per_class_score,
        }
    }
}

/// Index of the largest value; the first one wins on exact ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Anything that maps predictors to a `(ŷ, ẑ)` pair.
pub trait QqPredictor: Sync {
    /// Number of predictors expected in `x`.
    fn n_predictors(&self) -> usize;

    fn predict(&self, x: &DVector<f64>) -> Result<Prediction>;

    fn predict_batch(&self, xs: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        if xs.nrows() > 0 && xs.ncols() != self.n_predictors() {
            return Err(GaqqError::invalid(format!(
                "batch has {} columns, model expects {}",
                xs.ncols(),
                self.n_predictors()
            )));
        }
        xs.row_iter().map(|r| self.predict(&r.transpose())).collect()
    }
}

fn check_x(model: &ModelParams, x: &DVector<f64>) -> Result<()> {
    if x.len() + 1 != model.p() {
        return Err(GaqqError::invalid(format!(
            "x has length {}, model expects {}",
            x.len(),
            model.p() - 1
        )));
    }
    Ok(())
}

fn check_class(model: &ModelParams, k: usize) -> Result<()> {
    if k == 0 || k > model.k() {
        return Err(GaqqError::invalid(format!("class {k} outside 1..={}", model.k())));
    }
    Ok(())
}

/// Conditional mean of `y` given `x` in class `k`:
/// `μ_ky − (C_Xy / c_y²)'(x − μ_kX)`.
pub fn predict_quantitative(model: &ModelParams, x: &DVector<f64>, k: usize) -> Result<f64> {
    check_x(model, x)?;
    check_class(model, k)?;
    let mu = model.mu_k(k);
    let coef = model.regression_coef();
    let mut y = mu[model.p() - 1];
    for j in 0..x.len() {
        y += coef[j] * (x[j] - mu[j]);
    }
    Ok(y)
}

/// `ln φ(w; μ_k, Σ)` using the cached log-determinant of the precision.
fn log_density(model: &ModelParams, w: &DVector<f64>, k: usize) -> f64 {
    let r = w - model.mu_k(k);
    let p = model.p() as f64;
    -0.5 * p * (2.0 * PI).ln() + 0.5 * model.log_det_c() - 0.5 * model.c_hat().quad_form(&r)
}

fn joint_point(x: &DVector<f64>, y: f64) -> DVector<f64> {
    let mut w = DVector::zeros(x.len() + 1);
    w.rows_mut(0, x.len()).copy_from(x);
    w[x.len()] = y;
    w
}

/// `ln π_k + ln φ((x, ŷ_k); μ_k, Σ)`.
pub fn log_class_score(model: &ModelParams, x: &DVector<f64>, k: usize) -> Result<f64> {
    let y = predict_quantitative(model, x, k)?;
    Ok(model.pi()[k - 1].ln() + log_density(model, &joint_point(x, y), k))
}

/// Linear discriminant of class `k` against class 1 on a full vector `w`:
/// `ln(π_k/π_1) + (w − (μ_1 + μ_k)/2)' C (μ_k − μ_1)`. Zero for `k = 1`.
pub fn lda_score(model: &ModelParams, w: &DVector<f64>, k: usize) -> Result<f64> {
    if w.len() != model.p() {
        return Err(GaqqError::invalid(format!(
            "w has length {}, model expects {}",
            w.len(),
            model.p()
        )));
    }
    check_class(model, k)?;
    if k == 1 {
        return Ok(0.0);
    }
    let (m1, mk) = (model.mu_k(1), model.mu_k(k));
    let gap = mk - m1;
    let centered = w - (m1 + mk) * 0.5;
    let cg = model.c_hat().as_matrix() * gap;
    Ok((model.pi()[k - 1] / model.pi()[0]).ln() + centered.dot(&cg))
}

/// The same discriminant computed on `x` alone with the marginal precision
/// `Σ_X⁻¹ = C_X − C_Xy C_Xy' / c_y²`.
pub fn marginal_lda_score(model: &ModelParams, x: &DVector<f64>, k: usize) -> Result<f64> {
    check_x(model, x)?;
    check_class(model, k)?;
    if k == 1 {
        return Ok(0.0);
    }
    let (m1, mk) = (model.mu_x(1), model.mu_x(k));
    let gap = &mk - &m1;
    let centered = x - (m1 + mk) * 0.5;
    let prec = model.marginal_precision_x();
    Ok((model.pi()[k - 1] / model.pi()[0]).ln() + centered.dot(&(prec * gap)))
}

/// Label from the two-step route: pick `ŷ` from the density winner, then
/// classify `w = (x, ŷ)` with [`lda_score`].
pub fn lda_route_label(model: &ModelParams, x: &DVector<f64>) -> Result<usize> {
    let first = predict(model, x)?;
    let w = joint_point(x, first.y_hat);
    let scores = (1..=model.k())
        .map(|k| lda_score(model, &w, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_first(&scores) + 1)
}

pub fn predict(model: &ModelParams, x: &DVector<f64>) -> Result<Prediction> {
    check_x(model, x)?;
    let mut ys = Vec::with_capacity(model.k());
    let mut scores = Vec::with_capacity(model.k());
    for k in 1..=model.k() {
        let y = predict_quantitative(model, x, k)?;
        let s = model.pi()[k - 1].ln() + log_density(model, &joint_point(x, y), k);
        ys.push(y);
        scores.push(s);
    }
    Ok(Prediction::from_scores(ys, scores))
}

pub fn predict_batch(model: &ModelParams, xs: &DMatrix<f64>) -> Result<Vec<Prediction>> {
    QqPredictor::predict_batch(model, xs)
}

impl QqPredictor for ModelParams {
    fn n_predictors(&self) -> usize {
        self.p() - 1
    }

    fn predict(&self, x: &DVector<f64>) -> Result<Prediction> {
        predict(self, x)
    }
}

/// Linear discriminant baseline: class means, pooled sample covariance and
/// its eigen pseudo-inverse. Labels come from the discriminant on `x`;
/// responses from the regression of `y` on `x` implied by the pooled
/// covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GldaModel {
    mu: Vec<DVector<f64>>,
    pi: Vec<f64>,
    sigma: SymMatrix,
    c_pinv: SymMatrix,
    sigma_x_pinv: SymMatrix,
    coef: DVector<f64>,
}

impl GldaModel {
    pub fn mu(&self) -> &[DVector<f64>] {
        &self.mu
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Pooled covariance with divisor `n − K`.
    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    /// Pseudo-inverse of the pooled covariance.
    pub fn c_hat(&self) -> &SymMatrix {
        &self.c_pinv
    }

    pub fn p(&self) -> usize {
        self.sigma.dim()
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }
}

pub fn glda_baseline(train: &Dataset) -> Result<GldaModel> {
    let (n, p, k) = (train.n(), train.p(), train.k());
    let mut sums = vec![DVector::<f64>::zeros(p); k];
    for (i, &z) in train.labels().iter().enumerate() {
        sums[z - 1] += train.w().row(i).transpose();
    }
    let mu: Vec<DVector<f64>> = sums
        .iter()
        .zip(train.class_counts())
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mut resid = train.w().clone();
    for (i, &z) in train.labels().iter().enumerate() {
        for j in 0..p {
            resid[(i, j)] -= mu[z - 1][j];
        }
    }
    let sigma = SymMatrix::new(resid.transpose() * &resid / (n - k) as f64)?;
    let c_pinv = pinv_sym(&sigma, GLDA_PINV_CUTOFF)?;
    let q = p - 1;
    let sigma_x = SymMatrix::new(sigma.as_matrix().view((0, 0), (q, q)).into_owned())?;
    let sigma_x_pinv = pinv_sym(&sigma_x, GLDA_PINV_CUTOFF)?;
    let sigma_xy = sigma.as_matrix().view((0, q), (q, 1)).column(0).into_owned();
    let coef = sigma_x_pinv.as_matrix() * sigma_xy;
    let pi = train.class_counts().iter().map(|&c| c as f64 / n as f64).collect();
    Ok(GldaModel {
        mu,
        pi,
        sigma,
        c_pinv,
        sigma_x_pinv,
        coef,
    })
}

impl QqPredictor for GldaModel {
    fn n_predictors(&self) -> usize {
        self.p() - 1
    }

    fn predict(&self, x: &DVector<f64>) -> Result<Prediction> {
        let q = self.p() - 1;
        if x.len() != q {
            return Err(GaqqError::invalid(format!("x has length {}, model expects {q}", x.len())));
        }
        let mut ys = Vec::with_capacity(self.k());
        let mut scores = Vec::with_capacity(self.k());
        for (mu, &pi) in self.mu.iter().zip(&self.pi) {
            let r = x - mu.rows(0, q);
            ys.push(mu[q] + self.coef.dot(&r));
            scores.push(pi.ln() - 0.5 * self.sigma_x_pinv.quad_form(&r));
        }
        Ok(Prediction::from_scores(ys, scores))
    }
}
