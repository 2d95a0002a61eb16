use nalgebra::{DMatrix, DVector};

use crate::error::{GaqqError, Result};
use crate::numerics::SymMatrix;

/// Labeled samples `w_i = (x_i', y_i)'` with the quantitative response as the
/// last coordinate and class labels in `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    w: DMatrix<f64>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(w: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, p) = w.shape();
        if labels.len() != n {
            return Err(GaqqError::invalid(format!(
                "{n} rows but {} labels",
                labels.len()
            )));
        }
        if p < 2 {
            return Err(GaqqError::invalid(
                "need at least one predictor plus the response (p >= 2)",
            ));
        }
        if let Some((idx, _)) = w.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GaqqError::invalid(format!(
                "non-finite value at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        if labels.iter().any(|&z| z == 0) {
            return Err(GaqqError::invalid("class labels are 1-based"));
        }
        let k = labels.iter().copied().max().unwrap_or(0);
        if k < 2 {
            return Err(GaqqError::invalid("need at least two classes"));
        }
        let mut class_counts = vec![0usize; k];
        for &z in &labels {
            class_counts[z - 1] += 1;
        }
        for (i, &c) in class_counts.iter().enumerate() {
            if c < 2 {
                return Err(GaqqError::invalid(format!(
                    "class {} has {c} samples; every class needs at least 2",
                    i + 1
                )));
            }
        }
        Ok(Self {
            w,
            labels,
            class_counts,
        })
    }

    /// Stacks per-class sample matrices; block `k` gets label `k + 1`.
    pub fn from_class_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let p = blocks.first().map(|b| b.ncols()).unwrap_or(0);
        if blocks.iter().any(|b| b.ncols() != p) {
            return Err(GaqqError::invalid("class blocks disagree on dimension"));
        }
        let n: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut w = DMatrix::zeros(n, p);
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for (k, b) in blocks.iter().enumerate() {
            w.rows_mut(row, b.nrows()).copy_from(b);
            labels.extend(std::iter::repeat(k + 1).take(b.nrows()));
            row += b.nrows();
        }
        Self::new(w, labels)
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn p(&self) -> usize {
        self.w.ncols()
    }

    pub fn k(&self) -> usize {
        self.class_counts.len()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Predictor block of row `i`.
    pub fn x_row(&self, i: usize) -> DVector<f64> {
        let p = self.p();
        DVector::from_iterator(p - 1, (0..p - 1).map(|j| self.w[(i, j)]))
    }

    pub fn y(&self, i: usize) -> f64 {
        self.w[(i, self.p() - 1)]
    }

    pub fn x_matrix(&self) -> DMatrix<f64> {
        self.w.columns(0, self.p() - 1).into_owned()
    }

    pub fn responses(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.y(i)).collect()
    }

    pub(crate) fn stats(&self) -> ClassStats {
        ClassStats::new(self)
    }
}

/// Sufficient statistics shared by the working-scatter and working-response
/// builders.
#[derive(Debug, Clone)]
pub(crate) struct ClassStats {
    pub n: usize,
    pub counts: Vec<usize>,
    pub mean: DVector<f64>,
    pub class_means: Vec<DVector<f64>>,
    /// `Σ_{i∈G_k} (w_i − w̄) = n_k (w̄_k − w̄)`
    pub centered_sums: Vec<DVector<f64>>,
    /// `Σ_i (w_i − w̄)(w_i − w̄)'`
    pub total_scatter: DMatrix<f64>,
}

impl ClassStats {
    fn new(data: &Dataset) -> Self {
        let n = data.n();
        let p = data.p();
        let k = data.k();
        let w = data.w();
        let mut sums = vec![DVector::zeros(p); k];
        for i in 0..n {
            let c = data.labels[i] - 1;
            for j in 0..p {
                sums[c][j] += w[(i, j)];
            }
        }
        let counts = data.class_counts.clone();
        let class_means: Vec<DVector<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let mut mean = DVector::zeros(p);
        for s in &sums {
            mean += s;
        }
        mean /= n as f64;
        let mut centered = w.clone();
        for i in 0..n {
            for j in 0..p {
                centered[(i, j)] -= mean[j];
            }
        }
        let mut centered_sums = vec![DVector::zeros(p); k];
        for i in 0..n {
            let c = data.labels[i] - 1;
            for j in 0..p {
                centered_sums[c][j] += centered[(i, j)];
            }
        }
        let total_scatter = centered.transpose() * &centered;
        Self {
            n,
            counts,
            mean,
            class_means,
            centered_sums,
            total_scatter,
        }
    }

    /// `Σ_k Σ_{i∈G_k} (w_i − w̄ + o_k)(w_i − w̄ + o_k)'` for per-class offsets `o_k`.
    pub fn shifted_scatter(&self, offsets: &[DVector<f64>]) -> SymMatrix {
        let mut s = self.total_scatter.clone();
        for ((o, sum), &nk) in offsets.iter().zip(&self.centered_sums).zip(&self.counts) {
            // sum·o' + o·sum' + n_k·o·o'
            s.ger(1.0, sum, o, 1.0);
            s.ger(1.0, o, sum, 1.0);
            s.ger(nk as f64, o, o, 1.0);
        }
        SymMatrix::new(s).expect("square by construction")
    }
}
