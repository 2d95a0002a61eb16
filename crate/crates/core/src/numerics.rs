//! Dense symmetric linear algebra used by the solvers.
//!
//! Everything here operates on [`SymMatrix`], a square matrix whose symmetry
//! is enforced at construction by averaging `(M + M') / 2`. Eigendecompositions
//! are delegated to nalgebra's symmetric QR solver (Householder
//! tridiagonalization followed by implicit shifted QR), with eigenvalues
//! re-sorted into ascending order so results are canonical.

use nalgebra::{DMatrix, DVector};

use crate::error::{GaqqError, Result};

/// Default floor applied to eigenvalues before taking square roots.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-10;

/// Dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps a square matrix, replacing it with `(M + M') / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(GaqqError::invalid(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(GaqqError::invalid("matrix dimension must be at least 1"));
        }
        let mut inner = m;
        let p = inner.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let avg = 0.5 * (inner[(i, j)] + inner[(j, i)]);
                inner[(i, j)] = avg;
                inner[(j, i)] = avg;
            }
        }
        Ok(Self { inner })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            inner: DMatrix::identity(p, p),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// Builds from a generator evaluated on the lower triangle only.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut inner = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in j..p {
                let v = f(i, j);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Self { inner }
    }

    /// Wraps a matrix the caller guarantees to be exactly symmetric.
    pub(crate) fn from_symmetric_unchecked(inner: DMatrix<f64>) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.inner.component_mul(&other.inner).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// Quadratic form `v' M v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.inner * v))
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    /// `V · diag(f(λ)) · V'`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..p {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMatrix::new(&scaled * self.vectors.transpose()).expect("square by construction")
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

pub fn sym_eig(m: &SymMatrix) -> Result<EigenPair> {
    if !m.is_finite() {
        return Err(GaqqError::invalid("eigendecomposition of non-finite matrix"));
    }
    let eig = m.inner.clone().symmetric_eigen();
    let p = m.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenPair { values, vectors })
}

/// PSD square root with eigenvalues clamped below at `eig_floor`.
pub fn sqrt_spd(m: &SymMatrix, eig_floor: f64) -> Result<SymMatrix> {
    if eig_floor < 0.0 || !eig_floor.is_finite() {
        return Err(GaqqError::invalid("eig_floor must be a finite non-negative number"));
    }
    let eig = sym_eig(m)?;
    let limit = -1e-10 * m.max_abs();
    if eig.min_value() < limit {
        return Err(GaqqError::NotPositiveSemiDefinite(format!(
            "smallest eigenvalue {:.3e}",
            eig.min_value()
        )));
    }
    Ok(eig.reconstruct_with(|l| l.max(eig_floor).sqrt()))
}

/// Lower Cholesky factor `L` with `L L' = m`.
pub fn cholesky_lower(m: &SymMatrix) -> Result<DMatrix<f64>> {
    if !m.is_finite() {
        return Err(GaqqError::invalid("Cholesky of non-finite matrix"));
    }
    m.inner
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| GaqqError::NotPositiveDefinite("Cholesky factorization failed".into()))
}

pub fn log_det_spd(m: &SymMatrix) -> Result<f64> {
    let l = cholesky_lower(m)?;
    Ok(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inv_spd(m: &SymMatrix) -> Result<SymMatrix> {
    if !m.is_finite() {
        return Err(GaqqError::invalid("inverse of non-finite matrix"));
    }
    let chol = m
        .inner
        .clone()
        .cholesky()
        .ok_or_else(|| GaqqError::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    SymMatrix::new(chol.inverse())
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix; eigenvalues with
/// `|λ| <= rel_cutoff · max|λ|` are treated as zero.
pub fn pinv_sym(m: &SymMatrix, rel_cutoff: f64) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    let scale = eig.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cut = rel_cutoff * scale;
    Ok(eig.reconstruct_with(|l| if l.abs() > cut { 1.0 / l } else { 0.0 }))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(p: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymMatrix::from_fn(p, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(p: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(&a * a.transpose() + DMatrix::identity(p, p) * 0.5).unwrap()
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 1.0])).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn eig_of_identity_and_diagonal() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let e = sym_eig(&SymMatrix::from_diagonal(&[9.0, 4.0])).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-14);
        assert!((e.values[1] - 9.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        for seed in 0..10 {
            let m = random_sym(5, seed);
            let e = sym_eig(&m).unwrap();
            let rec = e.reconstruct_with(|l| l);
            assert!(max_abs_diff(rec.as_matrix(), m.as_matrix()) <= 1e-8 * (1.0 + m.max_abs()));
            let vtv = e.vectors.transpose() * &e.vectors;
            assert!(max_abs_diff(&vtv, &DMatrix::identity(5, 5)) <= 1e-10);
            assert!(e.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_rejects_non_finite() {
        let m = SymMatrix::from_diagonal(&[1.0, f64::NAN]);
        assert!(matches!(sym_eig(&m), Err(GaqqError::InvalidInput(_))));
    }

    #[test]
    fn sqrt_examples() {
        let s = sqrt_spd(&SymMatrix::from_diagonal(&[4.0, 9.0]), 0.0).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((s.get(1, 1) - 3.0).abs() < 1e-14);
        assert!(s.get(0, 1).abs() < 1e-14);
        let s = sqrt_spd(&SymMatrix::identity(4), DEFAULT_EIG_FLOOR).unwrap();
        assert!(max_abs_diff(s.as_matrix(), &DMatrix::identity(4, 4)) < 1e-14);
        let m = random_spd(6, 3);
        let s = sqrt_spd(&m, 0.0).unwrap();
        let sq = s.as_matrix() * s.as_matrix();
        assert!(max_abs_diff(&sq, m.as_matrix()) <= 1e-8);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(
            sqrt_spd(&m, 0.0),
            Err(GaqqError::NotPositiveSemiDefinite(_))
        ));
    }

    #[test]
    fn sqrt_of_rank_deficient_psd() {
        let v = DVector::from_column_slice(&[1.0, 2.0, -1.0]);
        let m = SymMatrix::new(&v * v.transpose()).unwrap();
        let s = sqrt_spd(&m, DEFAULT_EIG_FLOOR).unwrap();
        let sq = s.as_matrix() * s.as_matrix();
        assert!(max_abs_diff(&sq, m.as_matrix()) <= 1e-8);
    }

    #[test]
    fn log_det_examples() {
        assert!(log_det_spd(&SymMatrix::identity(5)).unwrap().abs() < 1e-14);
        let e = std::f64::consts::E;
        let ld = log_det_spd(&SymMatrix::from_diagonal(&[e, e * e])).unwrap();
        assert!((ld - 3.0).abs() < 1e-13);
        let m = random_spd(4, 11);
        let eig_ld: f64 = sym_eig(&m).unwrap().values.iter().map(|v| v.ln()).sum();
        assert!((log_det_spd(&m).unwrap() - eig_ld).abs() < 1e-10);
        assert!(matches!(
            log_det_spd(&SymMatrix::from_diagonal(&[1.0, 0.0])),
            Err(GaqqError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn inverse_examples() {
        let inv = inv_spd(&SymMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert!((inv.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((inv.get(1, 1) - 0.25).abs() < 1e-15);
        let m = random_spd(8, 5);
        let inv = inv_spd(&m).unwrap();
        let prod = m.as_matrix() * inv.as_matrix();
        assert!(max_abs_diff(&prod, &DMatrix::identity(8, 8)) <= 1e-8);
        let ld = log_det_spd(&m).unwrap();
        assert!((log_det_spd(&inv).unwrap() + ld).abs() <= 1e-8);
    }

    #[test]
    fn pinv_axioms_on_singular_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = SymMatrix::new(&a * a.transpose()).unwrap();
        let pi = pinv_sym(&m, 1e-10).unwrap();
        let back = m.as_matrix() * pi.as_matrix() * m.as_matrix();
        assert!(max_abs_diff(&back, m.as_matrix()) <= 1e-8);
    }

    #[test]
    fn operations_are_deterministic() {
        let m = random_spd(7, 9);
        assert_eq!(sqrt_spd(&m, 1e-10).unwrap(), sqrt_spd(&m, 1e-10).unwrap());
        assert_eq!(inv_spd(&m).unwrap(), inv_spd(&m).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn sqrt_squares_back(seed in any::<u64>(), p in 1usize..8) {
                let m = random_spd(p, seed);
                let s = sqrt_spd(&m, DEFAULT_EIG_FLOOR).unwrap();
                let sq = s.as_matrix() * s.as_matrix();
                prop_assert!(max_abs_diff(&sq, m.as_matrix()) <= 1e-8);
            }

            #[test]
            fn log_det_of_inverse_negates(seed in any::<u64>(), p in 1usize..8) {
                let m = random_spd(p, seed);
                let a = log_det_spd(&m).unwrap();
                let b = log_det_spd(&inv_spd(&m).unwrap()).unwrap();
                prop_assert!((a + b).abs() <= 1e-8);
            }
        }
    }
}
