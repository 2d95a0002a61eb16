//! Generative joint modeling of a quantitative and a qualitative response.
//!
//! Observations `w = (x', y)'` are modeled as class-conditional Gaussians
//! `N(μ_k, Σ)` sharing one covariance. The class means and the precision
//! `C = Σ⁻¹` are estimated under an ℓ1-penalized likelihood by alternating a
//! graphical-lasso solve for `C` with lasso solves for the mean differences.
//! Prediction conditions on `x` to produce both `ŷ` and the class label.
//!
//! Module map:
//!
//! - [`numerics`]: symmetric eigendecomposition, SPD square root, inverse, log-det
//! - [`lasso`]: coordinate-descent lasso
//! - [`glasso`]: sparse precision estimation
//! - [`estimator`]: alternating fit (two-class and K-class), BIC tuning
//! - [`predictor`]: joint prediction of `(ŷ, ẑ)` and the GLDA baseline
//! - [`simulation`]: synthetic scenarios, metrics and replicated benchmarks
//! - [`io`]: CSV ingestion and model files

pub mod error;
pub mod estimator;
pub mod glasso;
pub mod io;
pub mod lasso;
pub mod numerics;
pub mod predictor;
pub mod simulation;

pub use error::{GaqqError, Result};
pub use estimator::{Dataset, FitTrace, Hyperparams, ModelParams};
pub use numerics::SymMatrix;
pub use predictor::{Prediction, QqPredictor};
