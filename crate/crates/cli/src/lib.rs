//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//! 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use gaqq::estimator::{bic, default_grid, fit, tune, Hyperparams};
use gaqq::io::{
    data_fingerprint, load_csv, load_model, save_model, write_dataset_csv, ColumnRef, DataSchema,
    FitMetadata, ModelFile, Table, TruthFile,
};
use gaqq::predictor::QqPredictor;
use gaqq::simulation::rng::replication_rng;
use gaqq::simulation::{
    misclassification_error, preset, rmspe, run_benchmark, simulate, write_records_csv,
    write_summary_csv, BenchConfig, ClassSetup, Method, PrecisionModel, ScenarioSpec, Sparsity,
};
use gaqq::GaqqError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gaqq", about = "Joint prediction of a quantitative and a qualitative response")]
struct Cli {
    /// Worker threads for grid search and replications.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Predict response and class for each row of a CSV file.
    Predict(PredictArgs),
    /// Draw one training and test set from a synthetic scenario.
    Simulate(SimulateArgs),
    /// Replicated simulation benchmark.
    Benchmark(BenchmarkArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column: header name or 0-based index.
    #[arg(long)]
    label_col: String,
    /// Response column: header name or 0-based index.
    #[arg(long)]
    response_col: String,
    /// Comma-separated feature columns; defaults to all others.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    #[arg(long, conflicts_with = "tune")]
    lambda1: Option<f64>,
    #[arg(long, conflicts_with = "tune")]
    lambda2: Option<f64>,
    /// Select both penalties by BIC over a grid.
    #[arg(long)]
    tune: bool,
    /// Comma-separated λ1 grid (default: the data-scaled grid).
    #[arg(long, value_delimiter = ',', requires = "tune")]
    grid1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "tune")]
    grid2: Option<Vec<f64>>,
    #[arg(long)]
    out_model: PathBuf,
    /// Outer convergence threshold for both blocks.
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum outer iterations.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_header: bool,
    /// Column with true labels; enables the misclassification error.
    #[arg(long)]
    truth_label_col: Option<String>,
    /// Column with true responses; enables the RMSPE.
    #[arg(long)]
    truth_response_col: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// m1 … m5.
    #[arg(long, default_value = "m1")]
    precision_model: String,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Training size per class: one value or one per class.
    #[arg(long, value_delimiter = ',', default_value = "30")]
    sizes: Vec<usize>,
    /// Test size per class (default: the training sizes).
    #[arg(long, value_delimiter = ',')]
    test_sizes: Option<Vec<usize>>,
    /// s1 or s2 (two classes only).
    #[arg(long, default_value = "s1")]
    sparsity: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Scenario id (e.g. t1-m1-s2-p40) or preset (table1, table2, table3).
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "gaqq,glda")]
    methods: Vec<String>,
    /// Grid multipliers for both penalties (default 0.01 … 50).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Output directory for results.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Run(GaqqError),
}

impl From<GaqqError> for Failure {
    fn from(e: GaqqError) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(GaqqError::Io(e))
    }
}

type CmdResult = Result<(), Failure>;

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let outcome = pool.install(|| match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Version => {
            println!("gaqq {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if let GaqqError::TuningFailed(diag) = &e {
                for line in diag {
                    eprintln!("  {line}");
                }
            }
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DATA
            }
        }
    }
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    if !a.tune && (a.lambda1.is_none() || a.lambda2.is_none()) {
        return Err(Failure::Usage("fit needs --lambda1 and --lambda2, or --tune".into()));
    }
    let schema = DataSchema {
        label_column: ColumnRef::parse(&a.label_col),
        response_column: ColumnRef::parse(&a.response_col),
        feature_columns: a.features.as_ref().map(|f| f.iter().map(|s| ColumnRef::parse(s)).collect()),
        has_header: !a.no_header,
    };
    let (data, report) = load_csv(&a.data, &schema)?;
    let mut hp = Hyperparams::default();
    if let Some(t) = a.tol {
        hp.tau1 = t;
        hp.tau2 = t;
    }
    if let Some(m) = a.max_iter {
        hp.max_outer = m;
    }
    let (model, trace, score) = if a.tune {
        let base = default_grid(data.p(), data.n());
        let g1 = a.grid1.unwrap_or_else(|| base.clone());
        let g2 = a.grid2.unwrap_or(base);
        let res = tune(&data, &g1, &g2, &hp)?;
        (res.best, res.trace, res.best_bic)
    } else {
        hp.lambda1 = a.lambda1.unwrap_or_default();
        hp.lambda2 = a.lambda2.unwrap_or_default();
        let (model, trace) = fit(&data, &hp)?;
        let score = bic(&model, &data)?;
        (model, trace, score)
    };
    if !trace.converged {
        eprintln!(
            "warning: fit stopped after {} outer iterations without converging",
            trace.iterations
        );
    }
    let mut file = ModelFile::from_model(&model);
    file.labels = report.labels;
    file.feature_names = report.feature_names;
    file.response_name = report.response_name;
    file.metadata = FitMetadata {
        iterations: trace.iterations,
        converged: trace.converged,
        bic: Some(score),
        data_fingerprint: data_fingerprint(&data),
    };
    save_model(&file, &a.out_model)?;
    println!(
        "fitted K={} p={} lambda1={} lambda2={} bic={} iterations={} converged={}",
        model.k(),
        model.p(),
        model.lambda1,
        model.lambda2,
        score,
        trace.iterations,
        trace.converged
    );
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let file = load_model(&a.model)?;
    let model = file.to_model()?;
    let table = Table::read(&a.data, !a.no_header)?;
    let truth_label = a.truth_label_col.as_deref().map(|c| table.resolve(&ColumnRef::parse(c))).transpose()?;
    let truth_resp = a.truth_response_col.as_deref().map(|c| table.resolve(&ColumnRef::parse(c))).transpose()?;
    let features: Vec<usize> = if a.no_header {
        (0..table.headers.len())
            .filter(|j| Some(*j) != truth_label && Some(*j) != truth_resp)
            .collect()
    } else {
        file.feature_names
            .iter()
            .map(|n| table.resolve(&ColumnRef::Name(n.clone())))
            .collect::<gaqq::Result<_>>()?
    };
    if features.len() != model.p() - 1 {
        return Err(GaqqError::Schema(format!(
            "data supply {} feature columns, model expects {}",
            features.len(),
            model.p() - 1
        ))
        .into());
    }
    let xs: DMatrix<f64> = table.matrix(&features)?;
    let preds = model.predict_batch(&xs)?;

    let mut out = BufWriter::new(File::create(&a.out)?);
    writeln!(out, "row,y_hat,z_hat")?;
    for (i, p) in preds.iter().enumerate() {
        writeln!(out, "{},{},{}", i, p.y_hat, file.labels[p.z_hat - 1])?;
    }
    out.flush()?;

    if let Some(j) = truth_label {
        let truth: Vec<usize> = table
            .strings(j)?
            .iter()
            .enumerate()
            .map(|(i, s)| {
                file.labels
                    .iter()
                    .position(|l| l == s)
                    .map(|k| k + 1)
                    .ok_or_else(|| GaqqError::Parse {
                        row: i + 1 + usize::from(!a.no_header),
                        column: table.headers[j].clone(),
                        message: format!("label '{s}' unknown to the model"),
                    })
            })
            .collect::<gaqq::Result<_>>()?;
        let z: Vec<usize> = preds.iter().map(|p| p.z_hat).collect();
        println!("me={}", misclassification_error(&truth, &z)?);
    }
    if let Some(j) = truth_resp {
        let truth: Vec<f64> = (0..table.rows.len()).map(|i| table.number(i, j)).collect::<gaqq::Result<_>>()?;
        let y: Vec<f64> = preds.iter().map(|p| p.y_hat).collect();
        println!("rmspe={}", rmspe(&truth, &y)?);
    }
    Ok(())
}

fn per_class(sizes: &[usize], k: usize, what: &str) -> Result<Vec<usize>, Failure> {
    match sizes.len() {
        1 => Ok(vec![sizes[0]; k]),
        n if n == k => Ok(sizes.to_vec()),
        n => Err(Failure::Usage(format!("--{what} lists {n} values for {k} classes"))),
    }
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let model: PrecisionModel = a.precision_model.parse().map_err(|e: GaqqError| Failure::Usage(e.to_string()))?;
    let sparsity: Sparsity = a.sparsity.parse().map_err(|e: GaqqError| Failure::Usage(e.to_string()))?;
    if a.classes < 2 {
        return Err(Failure::Usage("--classes must be at least 2".into()));
    }
    let sizes = per_class(&a.sizes, a.classes, "sizes")?;
    let class_setup = if a.classes == 2 {
        ClassSetup::TwoClass {
            sparsity,
            sizes: [sizes[0], sizes[1]],
        }
    } else {
        ClassSetup::MultiClass { sizes }
    };
    let test_sizes = a
        .test_sizes
        .as_deref()
        .map(|t| per_class(t, a.classes, "test-sizes"))
        .transpose()?;
    let spec = ScenarioSpec {
        precision_model: model,
        p: a.p,
        class_setup,
        test_sizes,
        seed: a.seed,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut rng = replication_rng(spec.seed, 0, &spec.id());
    let (truth, train, test) = simulate(&spec, &mut rng)?;
    fs::create_dir_all(&a.out_dir)?;
    write_dataset_csv(BufWriter::new(File::create(a.out_dir.join("train.csv"))?), &train)?;
    write_dataset_csv(BufWriter::new(File::create(a.out_dir.join("test.csv"))?), &test)?;
    fs::write(a.out_dir.join("truth.json"), TruthFile::from_truth(&truth).to_json())?;
    println!("scenario {} written to {}", spec.id(), a.out_dir.display());
    Ok(())
}

fn cmd_benchmark(a: BenchmarkArgs) -> CmdResult {
    let specs = match preset(&a.scenario) {
        Some(s) => s,
        None => vec![ScenarioSpec::parse_id(&a.scenario).map_err(|e| Failure::Usage(e.to_string()))?],
    };
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<gaqq::Result<Vec<Method>>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if a.reps < 2 {
        return Err(Failure::Usage("--reps must be at least 2".into()));
    }
    let mut config = BenchConfig::default();
    if let Some(g) = a.grid {
        config.lambda1_multipliers = g.clone();
        config.lambda2_multipliers = g;
    }
    let mut records = Vec::new();
    let mut results = Vec::new();
    for spec in specs {
        let spec = spec.with_seed(a.seed);
        let report = run_benchmark(&spec, &methods, a.reps, &config)?;
        for r in &report.results {
            println!(
                "{} {}: ME {:.2}% ({:.2}), RMSPE {:.3} ({:.3}), {} ok, {} failed",
                r.scenario.id(),
                r.method,
                r.me_mean,
                r.me_se,
                r.rmspe_mean,
                r.rmspe_se,
                r.reps,
                r.failed
            );
        }
        records.extend(report.records);
        results.extend(report.results);
    }
    write_outputs(&a.out, |dir| {
        write_records_csv(BufWriter::new(File::create(dir.join("results.csv"))?), &records)?;
        write_summary_csv(BufWriter::new(File::create(dir.join("summary.csv"))?), &results)
    })
}

fn write_outputs(dir: &Path, f: impl FnOnce(&Path) -> gaqq::Result<()>) -> CmdResult {
    fs::create_dir_all(dir)?;
    f(dir)?;
    Ok(())
}
