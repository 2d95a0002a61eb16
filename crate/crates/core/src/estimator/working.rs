//! Working quantities of the alternating fit: the δ-adjusted scatter `S̃`
//! feeding the precision update, the transformed response `ỹ` feeding each
//! lasso update, and the penalized objective itself.

use nalgebra::DVector;

use super::data::{ClassStats, Dataset};
use crate::error::{GaqqError, Result};
use crate::glasso::off_diagonal_l1;
use crate::numerics::{log_det_spd, SymMatrix};

fn check_len(v: &DVector<f64>, p: usize, what: &str) -> Result<()> {
    if v.len() != p {
        return Err(GaqqError::invalid(format!(
            "{what} has length {} but data dimension is {p}",
            v.len()
        )));
    }
    Ok(())
}

fn require_two_classes(data: &Dataset) -> Result<()> {
    if data.k() != 2 {
        return Err(GaqqError::invalid(format!(
            "two-class routine called with K = {}",
            data.k()
        )));
    }
    Ok(())
}

pub(crate) fn two_class_offsets(stats: &ClassStats, delta2: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = stats.n as f64;
    let (n1, n2) = (stats.counts[0] as f64, stats.counts[1] as f64);
    vec![delta2 * (-2.0 * n2 / n), delta2 * (2.0 * n1 / n)]
}

/// Per-class shifts `(K/n) Σ_{g≥2} n_g δ_g − K δ_k` with `δ_1 ≡ 0`.
pub(crate) fn multi_class_offsets(stats: &ClassStats, deltas: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = stats.n as f64;
    let k = stats.counts.len() as f64;
    let p = stats.mean.len();
    let mut common = DVector::zeros(p);
    for (g, d) in deltas.iter().enumerate() {
        common.axpy(k * stats.counts[g + 1] as f64 / n, d, 1.0);
    }
    let mut out = Vec::with_capacity(stats.counts.len());
    out.push(common.clone());
    for d in deltas {
        out.push(&common - d * k);
    }
    out
}

/// `S̃ = Σ_{G1}(w_i − (2n₂/n)δ₂ − w̄)(·)' + Σ_{G2}(w_i + (2n₁/n)δ₂ − w̄)(·)'`,
/// with `δ₂ = (μ₁ − μ₂)/2`.
pub fn build_s_tilde_two_class(data: &Dataset, delta2: &DVector<f64>) -> Result<SymMatrix> {
    require_two_classes(data)?;
    check_len(delta2, data.p(), "delta2")?;
    let stats = data.stats();
    Ok(stats.shifted_scatter(&two_class_offsets(&stats, delta2)))
}

/// K-class working scatter; `deltas[g]` holds `δ_{g+2}`.
pub fn build_s_tilde_multi(data: &Dataset, deltas: &[DVector<f64>]) -> Result<SymMatrix> {
    check_deltas(data, deltas)?;
    let stats = data.stats();
    Ok(stats.shifted_scatter(&multi_class_offsets(&stats, deltas)))
}

fn check_deltas(data: &Dataset, deltas: &[DVector<f64>]) -> Result<()> {
    if deltas.len() + 1 != data.k() {
        return Err(GaqqError::invalid(format!(
            "expected {} mean differences, got {}",
            data.k() - 1,
            deltas.len()
        )));
    }
    for d in deltas {
        check_len(d, data.p(), "delta")?;
    }
    Ok(())
}

fn check_sqrt(data: &Dataset, c_sqrt: &SymMatrix) -> Result<()> {
    if c_sqrt.dim() != data.p() {
        return Err(GaqqError::invalid(format!(
            "square root has dimension {} but data dimension is {}",
            c_sqrt.dim(),
            data.p()
        )));
    }
    Ok(())
}

/// `ỹ = (1/(2n₁n₂))·C^{1/2}(n₂ Σ_{G1} w_i − n₁ Σ_{G2} w_i) = ½·C^{1/2}(w̄₁ − w̄₂)`.
pub fn build_y_tilde_two_class(data: &Dataset, c_sqrt: &SymMatrix) -> Result<DVector<f64>> {
    require_two_classes(data)?;
    check_sqrt(data, c_sqrt)?;
    let stats = data.stats();
    Ok(y_tilde_two_class(&stats, c_sqrt))
}

pub(crate) fn y_tilde_two_class(stats: &ClassStats, c_sqrt: &SymMatrix) -> DVector<f64> {
    let gap = (&stats.class_means[0] - &stats.class_means[1]) * 0.5;
    c_sqrt.as_matrix() * gap
}

/// Working response for class `k` (1-based, `k ≥ 2`):
///
/// ```text
/// ỹ = C^{1/2} [ (n − n_k) Σ_{G_k} w_i − n_k Σ_{∉G_k} w_i + K n_k Σ_{g≥2, g≠k} n_g δ_g ] / (K n_k (n − n_k))
/// ```
///
/// `deltas[g]` holds `δ_{g+2}`; the entry for `k` itself is ignored.
pub fn build_y_tilde_multi(
    data: &Dataset,
    k: usize,
    c_sqrt: &SymMatrix,
    deltas: &[DVector<f64>],
) -> Result<DVector<f64>> {
    check_deltas(data, deltas)?;
    check_sqrt(data, c_sqrt)?;
    if k < 2 || k > data.k() {
        return Err(GaqqError::invalid(format!(
            "class index {k} outside 2..={}",
            data.k()
        )));
    }
    let stats = data.stats();
    Ok(y_tilde_multi(&stats, k, c_sqrt, deltas))
}

pub(crate) fn y_tilde_multi(
    stats: &ClassStats,
    k: usize,
    c_sqrt: &SymMatrix,
    deltas: &[DVector<f64>],
) -> DVector<f64> {
    let n = stats.n as f64;
    let kk = stats.counts.len() as f64;
    let nk = stats.counts[k - 1] as f64;
    // (n − n_k) Σ_{G_k} w_i − n_k Σ_{∉G_k} w_i = n Σ_{G_k}(w_i − w̄)
    let mut m = &stats.centered_sums[k - 1] * n;
    for (g, d) in deltas.iter().enumerate() {
        if g + 2 != k {
            m.axpy(kk * nk * stats.counts[g + 1] as f64, d, 1.0);
        }
    }
    (c_sqrt.as_matrix() * m) / (kk * nk * (n - nk))
}

/// Curvature of the class-`k` block: the δ_k-part of the objective equals
/// `factor · ‖ỹ − C^{1/2}δ_k‖² + λ₂‖δ_k‖₁ + const`.
pub(crate) fn lasso_block_factor(n: usize, n_k: usize, k_classes: usize) -> f64 {
    let kk = k_classes as f64;
    kk * kk * n_k as f64 * (n - n_k) as f64 / n as f64
}

/// Penalized objective `−n ln|C| + tr(C S̃(δ)) + λ₁‖C‖₁ + λ₂ Σ_k ‖δ_k‖₁`,
/// with `δ` in the K-class convention.
pub fn penalized_objective(
    data: &Dataset,
    c: &SymMatrix,
    deltas: &[DVector<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let s = build_s_tilde_multi(data, deltas)?;
    objective_with_scatter(data.n(), c, &s, deltas, lambda1, lambda2)
}

pub(crate) fn objective_with_scatter(
    n: usize,
    c: &SymMatrix,
    s_tilde: &SymMatrix,
    deltas: &[DVector<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let ld = log_det_spd(c)?;
    let l1: f64 = deltas.iter().map(|d| d.lp_norm(1)).sum();
    Ok(-(n as f64) * ld + c.trace_product(s_tilde) + lambda1 * off_diagonal_l1(c) + lambda2 * l1)
}

/// The same objective written directly in the class means, before the
/// location is profiled out:
/// `−n ln|C| + Σ_k Σ_{G_k} (w_i − μ_k)'C(w_i − μ_k) + λ₁‖C‖₁ + (λ₂/K) Σ_{k≥2} ‖μ_k − μ_1‖₁`.
pub fn objective_from_means(
    data: &Dataset,
    c: &SymMatrix,
    mu: &[DVector<f64>],
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    if mu.len() != data.k() {
        return Err(GaqqError::invalid("need one mean per class"));
    }
    let ld = log_det_spd(c)?;
    let w = data.w();
    let mut fit = 0.0;
    for i in 0..data.n() {
        let r = w.row(i).transpose() - &mu[data.labels()[i] - 1];
        fit += c.quad_form(&r);
    }
    let kk = mu.len() as f64;
    let l1: f64 = mu[1..].iter().map(|m| (m - &mu[0]).lp_norm(1)).sum();
    Ok(-(data.n() as f64) * ld + fit + lambda1 * off_diagonal_l1(c) + lambda2 * l1 / kk)
}
