use rayon::prelude::*;

use super::data::Dataset;
use super::fit::fit;
use super::params::{FitTrace, Hyperparams, ModelParams};
use crate::error::{GaqqError, Result};
use crate::numerics::SymMatrix;

/// Entries with `|value|` above this count as nonzero in the BIC.
pub const NONZERO_THRESHOLD: f64 = 1e-8;

/// Multipliers of the default tuning grid.
pub const GRID_MULTIPLIERS: [f64; 8] = [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0];

pub fn count_nonzero<'a>(values: impl IntoIterator<Item = &'a f64>, threshold: f64) -> usize {
    values.into_iter().filter(|v| v.abs() > threshold).count()
}

/// Scatter of the samples about their fitted class means. With the location
/// profiled out this equals the working scatter at the fitted mean gaps.
pub fn fitted_scatter(model: &ModelParams, data: &Dataset) -> Result<SymMatrix> {
    check_compatible(model, data)?;
    let p = data.p();
    let mut resid = data.w().clone();
    for (i, &z) in data.labels().iter().enumerate() {
        let mu = model.mu_k(z);
        for j in 0..p {
            resid[(i, j)] -= mu[j];
        }
    }
    SymMatrix::new(resid.transpose() * &resid)
}

fn check_compatible(model: &ModelParams, data: &Dataset) -> Result<()> {
    if model.p() != data.p() || model.k() != data.k() {
        return Err(GaqqError::invalid(format!(
            "model has K = {}, p = {} but data has K = {}, p = {}",
            model.k(),
            model.p(),
            data.k(),
            data.p()
        )));
    }
    Ok(())
}

/// `−n ln|Ĉ| + tr(Ĉ S̃) + (v(δ̂) + v(Ĉ) + K − 1) ln n`.
pub fn bic(model: &ModelParams, data: &Dataset) -> Result<f64> {
    let s = fitted_scatter(model, data)?;
    let n = data.n() as f64;
    let v_delta: usize = model
        .delta()
        .iter()
        .map(|d| count_nonzero(d.iter(), NONZERO_THRESHOLD))
        .sum();
    let v_c = count_nonzero(model.c_hat().as_matrix().iter(), NONZERO_THRESHOLD);
    let df = (v_delta + v_c + model.k() - 1) as f64;
    Ok(-n * model.log_det_c() + model.c_hat().trace_product(&s) + df * n.ln())
}

/// `{0.01, …, 50} · √(ln p / n) · n`.
pub fn default_grid(p: usize, n: usize) -> Vec<f64> {
    let scale = ((p as f64).ln() / n as f64).sqrt() * n as f64;
    GRID_MULTIPLIERS.iter().map(|m| m * scale).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum TuneStatus {
    Ok,
    NotConverged,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneEntry {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `None` when the fit failed.
    pub bic: Option<f64>,
    pub status: TuneStatus,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: ModelParams,
    pub trace: FitTrace,
    pub best_bic: f64,
    /// One row per grid pair, `lambda1`-major in grid order.
    pub table: Vec<TuneEntry>,
}

/// Fits every `(λ1, λ2)` pair and keeps the converged fit with the smallest
/// BIC. Ties go to the larger pair in lexicographic order.
pub fn tune(data: &Dataset, lambda1_grid: &[f64], lambda2_grid: &[f64], hp: &Hyperparams) -> Result<TuneResult> {
    if lambda1_grid.is_empty() || lambda2_grid.is_empty() {
        return Err(GaqqError::invalid("tuning grids must be nonempty"));
    }
    let pairs: Vec<(f64, f64)> = lambda1_grid
        .iter()
        .flat_map(|&a| lambda2_grid.iter().map(move |&b| (a, b)))
        .collect();
    let fits: Vec<Result<(ModelParams, FitTrace, f64)>> = pairs
        .par_iter()
        .map(|&(l1, l2)| {
            let hp = Hyperparams {
                lambda1: l1,
                lambda2: l2,
                ..hp.clone()
            };
            let (model, trace) = fit(data, &hp)?;
            let b = bic(&model, data)?;
            Ok((model, trace, b))
        })
        .collect();

    let mut table = Vec::with_capacity(pairs.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, (&(l1, l2), res)) in pairs.iter().zip(&fits).enumerate() {
        let entry = match res {
            Ok((_, trace, b)) if trace.converged && b.is_finite() => {
                let better = match best {
                    None => true,
                    Some((bi, bb)) => {
                        let (bl1, bl2) = pairs[bi];
                        *b < bb || (*b == bb && (l1, l2) > (bl1, bl2))
                    }
                };
                if better {
                    best = Some((idx, *b));
                }
                TuneEntry { lambda1: l1, lambda2: l2, bic: Some(*b), status: TuneStatus::Ok }
            }
            Ok((_, _, b)) => TuneEntry {
                lambda1: l1,
                lambda2: l2,
                bic: Some(*b),
                status: TuneStatus::NotConverged,
            },
            Err(e) => TuneEntry {
                lambda1: l1,
                lambda2: l2,
                bic: None,
                status: TuneStatus::Failed(e.to_string()),
            },
        };
        table.push(entry);
    }

    let Some((idx, best_bic)) = best else {
        let diag = table
            .iter()
            .map(|e| format!("({}, {}): {:?}", e.lambda1, e.lambda2, e.status))
            .collect();
        return Err(GaqqError::TuningFailed(diag));
    };
    let (model, trace, _) = fits.into_iter().nth(idx).expect("index in range")?;
    Ok(TuneResult { best: model, trace, best_bic, table })
}
