//! Synthetic scenarios, evaluation metrics and replicated benchmarks.

mod bench;
mod metrics;
pub mod rng;
mod scenario;

pub use bench::{
    evaluate, run_benchmark, run_replication, run_replication_methods, write_records_csv,
    write_summary_csv, BenchConfig, BenchmarkReport, BenchmarkResult, Method, RepOutcome, RepRecord,
};
pub use metrics::{mean_and_se, misclassification_error, rmspe};
pub use scenario::{
    make_means_multi, make_means_two_class, make_precision, make_truth, preset, sample_mvn, simulate,
    ClassSetup, PrecisionModel, ScenarioSpec, Sparsity, Truth, DEFAULT_CLASS_SIZE, M5_ALPHA_STEP,
    M5_MIN_EIGENVALUE,
};
