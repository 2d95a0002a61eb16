//! Penalized joint estimation of class means and a shared sparse precision.

mod data;
mod fit;
mod params;
mod tune;
pub mod working;

pub use data::Dataset;
pub use fit::{fit, fit_multi_class, fit_two_class};
pub use params::{FitTrace, Hyperparams, ModelParams};
pub use tune::{
    bic, count_nonzero, default_grid, fitted_scatter, tune, TuneEntry, TuneResult, TuneStatus,
    GRID_MULTIPLIERS, NONZERO_THRESHOLD,
};
