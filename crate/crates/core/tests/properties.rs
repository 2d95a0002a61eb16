mod common;

use common::{normal, normal_matrix, two_class_data};
use gaqq::estimator::{count_nonzero, fit, Hyperparams, NONZERO_THRESHOLD};
use gaqq::glasso::{solve_glasso, GlassoProblem};
use gaqq::io::ModelFile;
use gaqq::lasso::{solve_lasso, LassoProblem};
use gaqq::numerics::{cholesky_lower, inv_spd, log_det_spd, sqrt_spd, sym_eig, SymMatrix, DEFAULT_EIG_FLOOR};
use gaqq::predictor::{lda_route_label, marginal_lda_score, predict, predict_quantitative};
use gaqq::simulation::{make_precision, misclassification_error, rmspe, PrecisionModel};
use gaqq::{Dataset, ModelParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(cases)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> SymMatrix {
    let a = normal_matrix(rng, p, p);
    SymMatrix::new(&a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.3).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, p: usize, k: usize) -> ModelParams {
    let mu = (0..k).map(|_| DVector::from_fn(p, |_, _| normal(rng))).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pi = raw.iter().map(|v| v / total).collect();
    ModelParams::new(mu, random_spd(rng, p), pi).unwrap()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), p in 1usize..12) {
        let m = random_spd(&mut rng(seed), p);
        let r = sqrt_spd(&m, DEFAULT_EIG_FLOOR).unwrap();
        let sq = r.as_matrix() * r.as_matrix();
        prop_assert!(max_diff(&sq, m.as_matrix()) <= 1e-8 * (1.0 + m.max_abs()));
    }

    #[test]
    fn log_det_of_inverse_negates(seed in any::<u64>(), p in 1usize..12) {
        let m = random_spd(&mut rng(seed), p);
        let a = log_det_spd(&m).unwrap();
        let b = log_det_spd(&inv_spd(&m).unwrap()).unwrap();
        prop_assert!((a + b).abs() <= 1e-8);
    }

    #[test]
    fn eigen_reconstruction(seed in any::<u64>(), p in 1usize..12) {
        let mut g = rng(seed);
        let m = SymMatrix::new(normal_matrix(&mut g, p, p)).unwrap();
        let e = sym_eig(&m).unwrap();
        let back = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
        prop_assert!(max_diff(&back, m.as_matrix()) <= 1e-8 * (1.0 + m.max_abs()));
        let gram = e.vectors.transpose() * &e.vectors;
        prop_assert!(max_diff(&gram, &DMatrix::identity(p, p)) <= 1e-10);
    }

    #[test]
    fn lasso_large_penalty_gives_zero(seed in any::<u64>(), m in 2usize..20, q in 1usize..8, extra in 0.0f64..3.0) {
        let mut g = rng(seed);
        let a = normal_matrix(&mut g, m, q);
        let r = normal_matrix(&mut g, m, 1).column(0).into_owned();
        let lambda = 2.0 * (a.transpose() * &r).amax() * (1.0 + extra);
        let sol = solve_lasso(&LassoProblem::new(&a, &r, lambda)).unwrap();
        prop_assert!(sol.beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn lasso_warm_start_irrelevant_when_strictly_convex(seed in any::<u64>(), q in 1usize..6, lambda in 0.0f64..5.0) {
        let mut g = rng(seed);
        let a = normal_matrix(&mut g, 3 * q + 5, q);
        let r = normal_matrix(&mut g, 3 * q + 5, 1).column(0).into_owned();
        let start = DVector::from_fn(q, |_, _| 3.0 * normal(&mut g));
        let cold = solve_lasso(&LassoProblem::new(&a, &r, lambda).with_tol(1e-12)).unwrap();
        let warm = solve_lasso(&LassoProblem::new(&a, &r, lambda).with_tol(1e-12).with_warm_start(&start)).unwrap();
        prop_assert!((cold.beta - warm.beta).amax() <= 1e-8);
    }

    #[test]
    fn glasso_output_spd_even_when_scatter_is_singular(seed in any::<u64>(), p in 3usize..15, frac in 0.1f64..1.0) {
        let mut g = rng(seed);
        let n = 2.max(p / 2);
        let x = normal_matrix(&mut g, n, p);
        let s = SymMatrix::new(x.transpose() * &x).unwrap();
        let sol = solve_glasso(&GlassoProblem::new(&s, n, frac * n as f64)).unwrap();
        prop_assert!(cholesky_lower(&sol.c_hat).is_ok());
        let prod = sol.c_hat.as_matrix() * sol.sigma_hat.as_matrix();
        prop_assert!(max_diff(&prod, &DMatrix::identity(p, p)) <= 1e-6);
    }

    #[test]
    fn count_nonzero_respects_threshold(values in proptest::collection::vec(-1.0f64..1.0, 0..40)) {
        let expected = values.iter().filter(|v| v.abs() > NONZERO_THRESHOLD).count();
        prop_assert_eq!(count_nonzero(values.iter(), NONZERO_THRESHOLD), expected);
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn density_and_lda_routes_agree(seed in any::<u64>(), p in 2usize..8, k in 2usize..5) {
        let mut g = rng(seed);
        let model = random_model(&mut g, p, k);
        let x = DVector::from_fn(p - 1, |_, _| 2.0 * normal(&mut g));
        let pred = predict(&model, &x).unwrap();
        prop_assert_eq!(lda_route_label(&model, &x).unwrap(), pred.z_hat);
        if k == 2 {
            let s = marginal_lda_score(&model, &x, 2).unwrap();
            prop_assume!(s.abs() > 1e-9);
            prop_assert_eq!(if s > 0.0 { 2 } else { 1 }, pred.z_hat);
        }
    }

    #[test]
    fn response_then_label_equals_label_then_response(seed in any::<u64>(), p in 2usize..8, k in 2usize..5) {
        let mut g = rng(seed);
        let model = random_model(&mut g, p, k);
        let x = DVector::from_fn(p - 1, |_, _| normal(&mut g));
        let pred = predict(&model, &x).unwrap();
        prop_assert_eq!(predict_quantitative(&model, &x, pred.z_hat).unwrap(), pred.y_hat);
    }

    #[test]
    fn translation_keeps_labels(seed in any::<u64>(), p in 2usize..8, k in 2usize..4) {
        let mut g = rng(seed);
        let model = random_model(&mut g, p, k);
        let x = DVector::from_fn(p - 1, |_, _| normal(&mut g));
        let shift = DVector::from_fn(p - 1, |_, _| normal(&mut g));
        let mut full_shift = DVector::zeros(p);
        full_shift.rows_mut(0, p - 1).copy_from(&shift);
        let moved = ModelParams::new(
            model.mu().iter().map(|m| m + &full_shift).collect(),
            model.c_hat().clone(),
            model.pi().to_vec(),
        ).unwrap();
        let a = predict(&model, &x).unwrap();
        let b = predict(&moved, &(&x + &shift)).unwrap();
        let gaps: Vec<f64> = a.per_class_score.iter().map(|s| (s - a.per_class_score[a.z_hat - 1]).abs()).collect();
        prop_assume!(gaps.iter().enumerate().all(|(i, gap)| i + 1 == a.z_hat || *gap > 1e-8));
        prop_assert_eq!(a.z_hat, b.z_hat);
        prop_assert!((a.y_hat - b.y_hat).abs() <= 1e-9 * (1.0 + a.y_hat.abs()));
    }

    #[test]
    fn metrics_ignore_test_order(seed in any::<u64>(), n in 1usize..50) {
        let mut g = rng(seed);
        let truth: Vec<usize> = (0..n).map(|_| g.random_range(1..4)).collect();
        let pred: Vec<usize> = (0..n).map(|_| g.random_range(1..4)).collect();
        let y: Vec<f64> = (0..n).map(|_| normal(&mut g)).collect();
        let yh: Vec<f64> = (0..n).map(|_| normal(&mut g)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut g);
        let me_a = misclassification_error(&truth, &pred).unwrap();
        let me_b = misclassification_error(
            &order.iter().map(|&i| truth[i]).collect::<Vec<_>>(),
            &order.iter().map(|&i| pred[i]).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert_eq!(me_a, me_b);
        let r_a = rmspe(&y, &yh).unwrap();
        let r_b = rmspe(
            &order.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            &order.iter().map(|&i| yh[i]).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert!((r_a - r_b).abs() <= 1e-12 * (1.0 + r_a));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn precision_models_are_spd(seed in any::<u64>(), p in 6usize..30, which in 0usize..5) {
        let model = PrecisionModel::ALL[which];
        let c = make_precision(model, p, &mut rng(seed)).unwrap();
        prop_assert!(cholesky_lower(&c).is_ok());
        if model == PrecisionModel::M5 {
            prop_assert!(sym_eig(&c).unwrap().values.min() >= 0.05 - 1e-12);
        }
    }

    #[test]
    fn permuted_ar_has_the_same_spectrum(seed in any::<u64>(), p in 2usize..30) {
        let m2 = make_precision(PrecisionModel::M2, p, &mut rng(seed)).unwrap();
        let m3 = make_precision(PrecisionModel::M3, p, &mut rng(seed)).unwrap();
        let a = sym_eig(&m2).unwrap().values;
        let b = sym_eig(&m3).unwrap().values;
        let mut a: Vec<f64> = a.iter().copied().collect();
        let mut b: Vec<f64> = b.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn model_file_round_trip_is_bit_exact(seed in any::<u64>(), p in 2usize..7, k in 2usize..4) {
        let model = random_model(&mut rng(seed), p, k).with_penalties(0.37, 1.0 / 3.0);
        let text = ModelFile::from_model(&model).to_json();
        let back = ModelFile::from_json(&text).unwrap().to_model().unwrap();
        prop_assert_eq!(back.c_hat().as_matrix(), model.c_hat().as_matrix());
        prop_assert_eq!(back.mu(), model.mu());
        prop_assert_eq!(back.pi(), model.pi());
        prop_assert_eq!(back.lambda1, model.lambda1);
        prop_assert_eq!(back.lambda2, model.lambda2);
    }
}

fn permuted(data: &Dataset, order: &[usize]) -> Dataset {
    let w = DMatrix::from_fn(data.n(), data.p(), |i, j| data.w()[(order[i], j)]);
    let labels = order.iter().map(|&i| data.labels()[i]).collect();
    Dataset::new(w, labels).unwrap()
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn fit_objective_never_increases(seed in any::<u64>(), p in 3usize..9, l1 in 0.1f64..8.0, l2 in 0.0f64..8.0) {
        let mut g = rng(seed);
        let data = two_class_data(&mut g, [15, 20], p, 1.0);
        let (_, trace) = fit(&data, &Hyperparams::with_penalties(l1, l2)).unwrap();
        for w in trace.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fit_ignores_sample_order(seed in any::<u64>(), p in 3usize..7, l1 in 0.5f64..5.0, l2 in 0.0f64..5.0) {
        let mut g = rng(seed);
        let data = two_class_data(&mut g, [12, 14], p, 1.5);
        let mut order: Vec<usize> = (0..data.n()).collect();
        order.shuffle(&mut g);
        let hp = Hyperparams { tau1: 1e-20, tau2: 1e-20, glasso_tol: 1e-12, lasso_tol: 1e-14, ..Hyperparams::with_penalties(l1, l2) };
        let (a, _) = fit(&data, &hp).unwrap();
        let (b, _) = fit(&permuted(&data, &order), &hp).unwrap();
        prop_assert!(max_diff(a.c_hat().as_matrix(), b.c_hat().as_matrix()) <= 1e-10 * (1.0 + a.c_hat().max_abs()));
        for k in 0..2 {
            prop_assert!((a.mu()[k].clone() - b.mu()[k].clone()).amax() <= 1e-10);
        }
    }
}
