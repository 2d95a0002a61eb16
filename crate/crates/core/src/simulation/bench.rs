use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use super::metrics::{mean_and_se, misclassification_error, rmspe};
use super::rng::replication_rng;
use super::scenario::{simulate, ScenarioSpec};
use crate::error::{GaqqError, Result};
use crate::io::csv_err;
use crate::estimator::{default_grid, tune, Dataset, Hyperparams, GRID_MULTIPLIERS};
use crate::predictor::{glda_baseline, QqPredictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Penalized joint model, BIC-tuned.
    Gaqq,
    /// Pooled-covariance discriminant baseline.
    Glda,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaqq => f.write_str("gaqq"),
            Self::Glda => f.write_str("glda"),
        }
    }
}

impl FromStr for Method {
    type Err = GaqqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaqq" => Ok(Self::Gaqq),
            "glda" => Ok(Self::Glda),
            _ => Err(GaqqError::invalid(format!("unknown method '{s}'"))),
        }
    }
}

/// Fitting settings shared by every replication. Both tuning grids are
/// `multipliers · √(ln p / n) · n` for the training `(p, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub hp: Hyperparams,
    pub lambda1_multipliers: Vec<f64>,
    pub lambda2_multipliers: Vec<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            hp: Hyperparams::default(),
            lambda1_multipliers: GRID_MULTIPLIERS.to_vec(),
            lambda2_multipliers: GRID_MULTIPLIERS.to_vec(),
        }
    }
}

impl BenchConfig {
    fn grids(&self, train: &Dataset) -> (Vec<f64>, Vec<f64>) {
        let base = default_grid(train.p(), train.n());
        let scale = base[4] / GRID_MULTIPLIERS[4];
        let g = |m: &[f64]| m.iter().map(|v| v * scale).collect();
        (g(&self.lambda1_multipliers), g(&self.lambda2_multipliers))
    }
}

/// Test-set metrics of one method on one replication. `me` is a fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepOutcome {
    pub me: f64,
    pub rmspe: f64,
}

/// Fits `method` on `train` and scores it on `test`.
pub fn evaluate(method: Method, train: &Dataset, test: &Dataset, config: &BenchConfig) -> Result<RepOutcome> {
    let xs = test.x_matrix();
    let preds = match method {
        Method::Gaqq => {
            let (g1, g2) = config.grids(train);
            tune(train, &g1, &g2, &config.hp)?.best.predict_batch(&xs)?
        }
        Method::Glda => glda_baseline(train)?.predict_batch(&xs)?,
    };
    let z: Vec<usize> = preds.iter().map(|p| p.z_hat).collect();
    let y: Vec<f64> = preds.iter().map(|p| p.y_hat).collect();
    Ok(RepOutcome {
        me: misclassification_error(test.labels(), &z)?,
        rmspe: rmspe(&test.responses(), &y)?,
    })
}

/// Runs every method on the data of replication `rep`. All methods see the
/// same truth, training and test sets.
pub fn run_replication_methods(
    spec: &ScenarioSpec,
    methods: &[Method],
    config: &BenchConfig,
    rep: u64,
) -> Result<Vec<Result<RepOutcome>>> {
    let mut rng = replication_rng(spec.seed, rep, &spec.id());
    let (_, train, test) = simulate(spec, &mut rng)?;
    Ok(methods.iter().map(|&m| evaluate(m, &train, &test, config)).collect())
}

pub fn run_replication(spec: &ScenarioSpec, method: Method, config: &BenchConfig, rep: u64) -> Result<RepOutcome> {
    run_replication_methods(spec, &[method], config, rep)?
        .pop()
        .expect("one method")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub scenario_id: String,
    pub method: Method,
    pub rep: u64,
    /// `None` for a failed replication.
    pub outcome: Option<RepOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub scenario: ScenarioSpec,
    pub method: Method,
    /// Successful replications.
    pub reps: usize,
    pub failed: usize,
    /// Percent.
    pub me_mean: f64,
    pub me_se: f64,
    pub rmspe_mean: f64,
    pub rmspe_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub records: Vec<RepRecord>,
    pub results: Vec<BenchmarkResult>,
}

/// Replications `0..reps`, evaluated in parallel on the current rayon pool
/// and reported in replication order.
pub fn run_benchmark(
    spec: &ScenarioSpec,
    methods: &[Method],
    reps: usize,
    config: &BenchConfig,
) -> Result<BenchmarkReport> {
    if reps < 2 {
        return Err(GaqqError::invalid("a benchmark needs at least two replications"));
    }
    if methods.is_empty() {
        return Err(GaqqError::invalid("no methods requested"));
    }
    spec.validate()?;
    let id = spec.id();
    let per_rep: Vec<Vec<Option<RepOutcome>>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| match run_replication_methods(spec, methods, config, rep) {
            Ok(outs) => outs
                .into_iter()
                .zip(methods)
                .map(|(o, m)| {
                    o.map_err(|e| warn!("{id} rep {rep} {m} failed: {e}")).ok()
                })
                .collect(),
            Err(e) => {
                warn!("{id} rep {rep} data generation failed: {e}");
                vec![None; methods.len()]
            }
        })
        .collect();

    let mut records = Vec::with_capacity(reps * methods.len());
    let mut results = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let outcomes: Vec<Option<RepOutcome>> = per_rep.iter().map(|r| r[mi]).collect();
        for (rep, o) in outcomes.iter().enumerate() {
            records.push(RepRecord {
                scenario_id: id.clone(),
                method,
                rep: rep as u64,
                outcome: *o,
            });
        }
        let ok: Vec<RepOutcome> = outcomes.iter().flatten().copied().collect();
        if ok.is_empty() {
            return Err(GaqqError::BenchmarkFailed(format!(
                "every replication of {id} failed for {method}"
            )));
        }
        let me: Vec<f64> = ok.iter().map(|o| 100.0 * o.me).collect();
        let rm: Vec<f64> = ok.iter().map(|o| o.rmspe).collect();
        let (me_mean, me_se) = mean_and_se(&me);
        let (rmspe_mean, rmspe_se) = mean_and_se(&rm);
        results.push(BenchmarkResult {
            scenario: spec.clone(),
            method,
            reps: ok.len(),
            failed: reps - ok.len(),
            me_mean,
            me_se,
            rmspe_mean,
            rmspe_se,
        });
    }
    // rep-major order within the scenario
    records.sort_by_key(|r| (r.rep, methods.iter().position(|m| *m == r.method)));
    Ok(BenchmarkReport { records, results })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Per-replication CSV: `scenario_id,method,rep,me,rmspe` with `me` in
/// percent and `NA` for failed replications.
pub fn write_records_csv<W: Write>(out: W, records: &[RepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario_id", "method", "rep", "me", "rmspe"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.scenario_id.clone(),
            r.method.to_string(),
            r.rep.to_string(),
            fmt_opt(r.outcome.map(|o| 100.0 * o.me)),
            fmt_opt(r.outcome.map(|o| o.rmspe)),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Summary CSV: one row per scenario and method.
pub fn write_summary_csv<W: Write>(out: W, results: &[BenchmarkResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario_id",
        "method",
        "reps",
        "failed",
        "me_mean",
        "me_se",
        "rmspe_mean",
        "rmspe_se",
    ])
    .map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.scenario.id(),
            r.method.to_string(),
            r.reps.to_string(),
            r.failed.to_string(),
            r.me_mean.to_string(),
            r.me_se.to_string(),
            r.rmspe_mean.to_string(),
            r.rmspe_se.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
