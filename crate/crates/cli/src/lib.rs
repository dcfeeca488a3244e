//! Command-line front end: `simulate`, `fit`, `eval` and `sweep`.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv_io;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use l12glasso_core::baselines::FusionGraph;
use l12glasso_core::evaluate::{
    holdout_split, regression_error, support_f1, support_f1_offdiag, sweep_on_split, HyperGrid, SupportMetrics,
    SweepOptions, SweepReport, TruthRef, DEFAULT_RATIO, DEFAULT_THRESHOLD,
};
use l12glasso_core::models::DEFAULT_GRAPH_THRESHOLD;
use l12glasso_core::simulate::{
    sample_validation, simulate, CovarianceCase, Perturbation, SimulationConfig, SimulationManifest,
};
use l12glasso_core::{fit_model, Dataset, Hyperparams, ModelKind};
use serde::Serialize;
use thiserror::Error;

use crate::csv_io::{load_matrix_csv, write_matrix_csv, CsvError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] l12glasso_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "l12glasso",
    version,
    about = "Sparse multi-task regression with a fused output precision graph"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known coefficients and precision matrix.
    Simulate(SimulateArgs),
    /// Fit one model to X and Y.
    Fit(FitArgs),
    /// Score an estimate against truth and/or held-out data.
    Eval(EvalArgs),
    /// Grid search over penalty weights with validation scoring.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PerturbArg {
    Uniform,
    Normal,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 120)]
    pub n: usize,
    #[arg(long, default_value_t = 60)]
    pub p: usize,
    #[arg(long, default_value_t = 60)]
    pub q: usize,
    #[arg(long, default_value_t = 3)]
    pub module_size: usize,
    #[arg(long, default_value_t = 3)]
    pub snps_per_module: usize,
    /// Covariance regime 1-4.
    #[arg(long, default_value_t = 1)]
    pub case: u8,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub perturb: PerturbArg,
    #[arg(long, default_value_t = 1.0)]
    pub t_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub e_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write this many independent validation rows (X_val.csv, Y_val.csv).
    #[arg(long)]
    pub validation_n: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Input CSV files start with a header row.
    #[arg(long)]
    pub header: bool,
    /// Column z-score X and Y before fitting.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    #[arg(long, default_value = "l12glasso")]
    pub model: String,
    /// JSON file with hyperparameter fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fixed output graph for gflasso, as a symmetric similarity matrix CSV.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// |corr| cut-off for the default gflasso graph.
    #[arg(long, default_value_t = DEFAULT_GRAPH_THRESHOLD)]
    pub graph_threshold: f64,
    /// Initial B-step size as a multiple of n / sigma_max(X'X).
    #[arg(long)]
    pub step_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, conflicts_with = "ratio")]
    pub tau: Option<f64>,
    /// Set tau = lambda1 / ratio.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated coefficients.
    #[arg(long)]
    pub b: PathBuf,
    /// Estimated precision matrix.
    #[arg(long)]
    pub theta: Option<PathBuf>,
    #[arg(long)]
    pub b_true: Option<PathBuf>,
    #[arg(long)]
    pub theta_true: Option<PathBuf>,
    /// Test inputs for the regression error.
    #[arg(long, requires = "y_test")]
    pub x_test: Option<PathBuf>,
    #[arg(long, requires = "x_test")]
    pub y_test: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    /// Relative support threshold.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Validation inputs; without them the data is split at random.
    #[arg(long, requires = "y_val")]
    pub x_val: Option<PathBuf>,
    #[arg(long, requires = "x_val")]
    pub y_val: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda1: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub lambda2: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub gamma: Vec<f64>,
    /// One or more lambda1 / tau ratios.
    #[arg(long, value_delimiter = ',', default_values_t = [DEFAULT_RATIO])]
    pub ratio: Vec<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Record wall time per grid point (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub b_true: Option<PathBuf>,
    #[arg(long)]
    pub theta_true: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let case = CovarianceCase::from_index(a.case).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = SimulationConfig {
        n: a.n,
        p: a.p,
        q: a.q,
        module_size: a.module_size,
        snps_per_module: a.snps_per_module,
        rho_perturb: a.rho,
        t_scale: a.t_scale,
        e_scale: a.e_scale,
        seed: a.seed,
        perturb: match a.perturb {
            PerturbArg::Uniform => Perturbation::Uniform,
            PerturbArg::Normal => Perturbation::Normal,
        },
        ..SimulationConfig::default()
    }
    .with_case(case);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (truth, data) = simulate(&cfg)?;
    ensure_dir(&a.out)?;
    write_matrix_csv(&a.out.join("X.csv"), data.x())?;
    write_matrix_csv(&a.out.join("Y.csv"), data.y())?;
    write_matrix_csv(&a.out.join("B_true.csv"), &truth.b_true)?;
    write_matrix_csv(&a.out.join("Theta_true.csv"), &truth.theta_true)?;
    write_matrix_csv(&a.out.join("T.csv"), &truth.t)?;
    write_matrix_csv(&a.out.join("E.csv"), &truth.e)?;
    if let Some(nv) = a.validation_n {
        let val = sample_validation(&truth, &cfg, nv)?;
        write_matrix_csv(&a.out.join("X_val.csv"), val.x())?;
        write_matrix_csv(&a.out.join("Y_val.csv"), val.y())?;
    }
    write_json(&a.out.join("manifest.json"), &SimulationManifest::new(&cfg, &truth))
}

fn load_data(x: &Path, y: &Path, header: bool, standardize: bool) -> CliResult<Dataset> {
    let data = Dataset::new(load_matrix_csv(x, header)?, load_matrix_csv(y, header)?)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(if standardize { data.standardized() } else { data })
}

fn parse_model(name: &str) -> CliResult<ModelKind> {
    name.parse()
        .map_err(|e: l12glasso_core::Error| CliError::Usage(e.to_string()))
}

fn base_hyperparams(pen: &PenaltyArgs) -> CliResult<Hyperparams> {
    let mut hp: Hyperparams = match &pen.config {
        None => Hyperparams::default(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(v) = pen.step_scale {
        hp.step_scale = v;
    }
    Ok(hp)
}

fn load_graph(pen: &PenaltyArgs, data: &Dataset, header: bool) -> CliResult<Option<FusionGraph>> {
    match &pen.graph {
        Some(path) => Ok(Some(
            FusionGraph::new(load_matrix_csv(path, header)?).map_err(|e| CliError::Usage(e.to_string()))?,
        )),
        None => Ok(Some(FusionGraph::from_correlation(data.y(), pen.graph_threshold))),
    }
}

#[derive(Serialize)]
struct FitRecord<'a> {
    model: ModelKind,
    hyperparams: &'a Hyperparams,
    converged: bool,
    outer_iterations: usize,
    objective_trace: &'a [f64],
}

fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let kind = parse_model(&a.penalty.model)?;
    let data = load_data(&a.data.x, &a.data.y, a.data.header, a.data.standardize)?;
    let mut hp = base_hyperparams(&a.penalty)?;
    if let Some(v) = a.lambda1 {
        hp.lambda1 = v;
    }
    if let Some(v) = a.lambda2 {
        hp.lambda2 = v;
    }
    if let Some(v) = a.gamma {
        hp.gamma = v;
    }
    if let Some(v) = a.tau {
        hp.tau = v;
    }
    if let Some(r) = a.ratio {
        if !(r > 0.0) {
            return Err(CliError::Usage(format!("--ratio must be positive, got {r}")));
        }
        hp.tau = hp.lambda1 / r;
    }
    if kind == ModelKind::Iclasso {
        hp.tau = 0.0;
    }
    hp.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let graph = if kind == ModelKind::Gflasso {
        load_graph(&a.penalty, &data, a.data.header)?
    } else {
        None
    };
    let fitted = fit_model(kind, &data, &hp, None, graph.as_ref())?;
    ensure_dir(&a.out)?;
    write_matrix_csv(&a.out.join("B.csv"), &fitted.b)?;
    if let Some(theta) = &fitted.theta {
        write_matrix_csv(&a.out.join("Theta.csv"), theta)?;
    }
    write_json(
        &a.out.join("trace.json"),
        &FitRecord {
            model: kind,
            hyperparams: &hp,
            converged: fitted.converged,
            outer_iterations: fitted.objective_trace.len(),
            objective_trace: &fitted.objective_trace,
        },
    )
}

#[derive(Serialize, Default)]
struct Metrics {
    b: Option<SupportMetrics>,
    theta: Option<SupportMetrics>,
    regression_error: Option<f64>,
    nnz_b: usize,
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let b = load_matrix_csv(&a.b, a.header)?;
    let usage = |e: l12glasso_core::Error| CliError::Usage(e.to_string());
    let mut m = Metrics {
        nnz_b: b.count_nonzero(),
        ..Metrics::default()
    };
    if let Some(path) = &a.b_true {
        m.b = Some(support_f1(&b, &load_matrix_csv(path, a.header)?, a.threshold).map_err(usage)?);
    }
    match (&a.theta, &a.theta_true) {
        (Some(est), Some(truth)) => {
            let est = load_matrix_csv(est, a.header)?;
            m.theta = Some(support_f1_offdiag(&est, &load_matrix_csv(truth, a.header)?, a.threshold).map_err(usage)?);
        }
        (None, Some(_)) => return Err(CliError::Usage("--theta-true needs --theta".into())),
        _ => {}
    }
    if let (Some(x), Some(y)) = (&a.x_test, &a.y_test) {
        let test = load_data(x, y, a.header, false)?;
        m.regression_error = Some(regression_error(&test, &b).map_err(usage)?);
    }
    ensure_dir(&a.out)?;
    write_json(&a.out.join("metrics.json"), &m)
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let kind = parse_model(&a.penalty.model)?;
    let data = load_data(&a.data.x, &a.data.y, a.data.header, a.data.standardize)?;
    let usage = |e: l12glasso_core::Error| CliError::Usage(e.to_string());
    let (train, valid) = match (&a.x_val, &a.y_val) {
        (Some(x), Some(y)) => (data, load_data(x, y, a.data.header, a.data.standardize)?),
        _ => holdout_split(&data, a.train_fraction, a.seed).map_err(usage)?,
    };
    if a.ratio.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::Usage("--ratio values must be positive".into()));
    }
    let grid = HyperGrid::new(a.lambda1.clone(), a.lambda2.clone(), a.gamma.clone())
        .map_err(usage)?
        .for_model(kind);
    let base = base_hyperparams(&a.penalty)?;
    let graph = if kind == ModelKind::Gflasso {
        load_graph(&a.penalty, &train, a.data.header)?
    } else {
        None
    };
    let b_true = a
        .b_true
        .as_deref()
        .map(|p| load_matrix_csv(p, a.data.header))
        .transpose()?;
    let theta_true = a
        .theta_true
        .as_deref()
        .map(|p| load_matrix_csv(p, a.data.header))
        .transpose()?;
    let truth = b_true.as_ref().map(|b| TruthRef {
        b,
        theta: theta_true.as_ref(),
    });
    // Ratios only matter for models with tau.
    let ratios: Vec<f64> = if kind.uses_tau() {
        a.ratio.clone()
    } else {
        vec![a.ratio[0]]
    };
    let mut reports = Vec::with_capacity(ratios.len());
    for &ratio in &ratios {
        let opts = SweepOptions {
            model: kind,
            ratio,
            train_fraction: a.train_fraction,
            seed: a.seed,
            base: base.clone(),
            threshold: a.threshold,
            jobs: a.jobs,
            timing: a.timing,
            warm_start: true,
            graph: graph.clone(),
        };
        reports.push(sweep_on_split(&train, &valid, &grid, &opts, truth)?);
    }
    ensure_dir(&a.out)?;
    write_sweep_csv(&a.out.join("sweep.csv"), &reports)?;
    write_json(&a.out.join("sweep.json"), &reports)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(csv_io::format_number).unwrap_or_default()
}

fn write_sweep_csv(path: &Path, reports: &[SweepReport]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record([
        "model",
        "ratio",
        "lambda1",
        "lambda2",
        "gamma",
        "tau",
        "validation_error",
        "nnz_b",
        "f1_b",
        "f1_theta",
        "outer_iterations",
        "wall_time_secs",
        "best",
        "error",
    ])
    .map_err(io)?;
    for r in reports {
        for (i, row) in r.rows.iter().enumerate() {
            let error = row.error.as_deref().unwrap_or("").replace([',', '\n', '"'], ";");
            w.write_record([
                r.model.name().to_string(),
                csv_io::format_number(r.ratio),
                csv_io::format_number(row.lambda1),
                csv_io::format_number(row.lambda2),
                csv_io::format_number(row.gamma),
                csv_io::format_number(row.tau),
                opt_num(row.validation_error),
                row.nnz_b.map(|v| v.to_string()).unwrap_or_default(),
                opt_num(row.f1_b),
                opt_num(row.f1_theta),
                row.outer_iterations.map(|v| v.to_string()).unwrap_or_default(),
                opt_num(row.wall_time_secs),
                (r.best == Some(i)).to_string(),
                error,
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
