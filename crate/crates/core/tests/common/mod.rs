//! Independent reference solvers used by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Random lasso instance whose minimizer sits well inside `[−3, 3]^q`.
pub fn lasso_instance(rng: &mut ChaCha8Rng, m: usize, q: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
    let a = normal_matrix(rng, m, q);
    let truth = DVector::from_fn(q, |_, _| rng.random_range(-1.5..1.5));
    let noise = DVector::from_fn(m, |_, _| 0.3 * normal(rng));
    let r = &a * truth + noise;
    let lambda = rng.random_range(0.0..4.0);
    (a, r, lambda)
}

/// Minimizes `‖r − Aβ‖² + λ|β|₁` over `[−3, 3]^q` by exhaustive grid search
/// (step 0.05) followed by three rounds of local grid refinement.
pub fn lasso_grid_oracle(a: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let q = a.ncols();
    assert!(q <= 3);
    let gram = a.transpose() * a;
    let lin = a.transpose() * r;
    let rr = r.norm_squared();
    let f = |b: &[f64]| {
        let mut v = rr;
        for i in 0..q {
            v += -2.0 * lin[i] * b[i] + lambda * b[i].abs();
            for j in 0..q {
                v += b[i] * gram[(i, j)] * b[j];
            }
        }
        v
    };

    let mut best = vec![0.0; q];
    let mut best_val = f(&best);
    let search = |center: &[f64], step: f64, half: i64, lo: f64, hi: f64, best: &mut Vec<f64>, best_val: &mut f64| {
        let width = (2 * half + 1) as usize;
        let total = width.pow(q as u32);
        let mut point = vec![0.0; q];
        for idx in 0..total {
            let mut rem = idx;
            for d in 0..q {
                let k = (rem % width) as i64 - half;
                rem /= width;
                point[d] = (center[d] + k as f64 * step).clamp(lo, hi);
            }
            let v = f(&point);
            if v < *best_val {
                *best_val = v;
                best.copy_from_slice(&point);
            }
        }
    };
    search(&vec![0.0; q], 0.05, 60, -3.0, 3.0, &mut best, &mut best_val);
    for step in [5e-3, 5e-4, 5e-5] {
        let center = best.clone();
        search(&center, step, 12, -3.0, 3.0, &mut best, &mut best_val);
    }
    DVector::from_vec(best)
}

fn golden(lo: f64, hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimizes the 2×2 penalized likelihood
/// `−n·ln(c₁₁c₂₂ − c₁₂²) + c₁₁s₁₁ + 2c₁₂s₁₂ + c₂₂s₂₂ + 2λ|c₁₂|`
/// by nested golden-section search over `c₁₂`, then `c₁₁`, then `c₂₂`.
/// Returns `(c₁₁, c₁₂, c₂₂)`.
pub fn glasso_2x2_oracle(s: [[f64; 2]; 2], n: f64, lambda: f64) -> (f64, f64, f64) {
    let obj = |c11: f64, c12: f64, c22: f64| {
        let det = c11 * c22 - c12 * c12;
        if det <= 0.0 {
            return f64::INFINITY;
        }
        -n * det.ln() + c11 * s[0][0] + 2.0 * c12 * s[0][1] + c22 * s[1][1] + 2.0 * lambda * c12.abs()
    };
    // the diagonal of C never exceeds n / (s_ii · (1 − r²)) with r the sample correlation
    let r2 = s[0][1] * s[0][1] / (s[0][0] * s[1][1]);
    let cap = 4.0 * n / (s[0][0].min(s[1][1]) * (1.0 - r2).max(1e-3));
    let tol = 1e-9;
    let best_given_c12 = |c12: f64| {
        golden(0.0, cap, tol, |c11| {
            let lo = c12 * c12 / c11.max(1e-300);
            golden(lo, cap.max(lo + 1.0), tol, |c22| obj(c11, c12, c22)).1
        })
    };
    let (c12, _) = golden(-cap, cap, tol, |c12| best_given_c12(c12).1);
    let (c11, _) = best_given_c12(c12);
    let lo = c12 * c12 / c11;
    let (c22, _) = golden(lo, cap.max(lo + 1.0), tol, |c22| obj(c11, c12, c22));
    (c11, c12, c22)
}

/// Two-class Gaussian sample with a shared random covariance and a shift
/// of `gap` in every other coordinate.
pub fn two_class_data(rng: &mut ChaCha8Rng, counts: [usize; 2], p: usize, gap: f64) -> gaqq::Dataset {
    let mix = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            0.3 * normal(rng) / (p as f64).sqrt()
        }
    });
    let blocks: Vec<DMatrix<f64>> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let z = normal_matrix(rng, c, p) * mix.transpose();
            DMatrix::from_fn(c, p, |i, j| z[(i, j)] + if j % 2 == 0 { gap * k as f64 } else { 0.0 })
        })
        .collect();
    gaqq::Dataset::from_class_blocks(&blocks).unwrap()
}

/// K-class sample with random class means in every coordinate.
pub fn multi_class_data(rng: &mut ChaCha8Rng, counts: &[usize], p: usize, spread: f64) -> gaqq::Dataset {
    let blocks: Vec<DMatrix<f64>> = counts
        .iter()
        .map(|&c| {
            let shift = DVector::from_fn(p, |_, _| spread * normal(rng));
            let z = normal_matrix(rng, c, p);
            DMatrix::from_fn(c, p, |i, j| z[(i, j)] + shift[j])
        })
        .collect();
    gaqq::Dataset::from_class_blocks(&blocks).unwrap()
}
