//! `graphcox` command-line tool.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "graphcox", version, about = "Graph-regularized Cox regression")]
struct Cli {
    /// Worker threads for replications and cross-validation folds.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one replication of a study: train/test CSVs, graph, true coefficients.
    Simulate(SimulateArgs),
    /// Build a predictor graph from covariates or from a study topology.
    Graph(GraphArgs),
    /// Fit a penalized Cox model; cross-validates λ unless `--lambda` is given.
    Fit(FitArgs),
    /// Write risk scores `x'β̂` for each row of a CSV.
    Predict(PredictArgs),
    /// Score risk predictions: c-index, and ℓ2 error / RPE when β0 is known.
    Evaluate(EvaluateArgs),
    /// Cross-validation curve over the λ grid.
    Cv(CvArgs),
    /// Run the simulation benchmark and write report files.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Graph,
    Lasso,
    Ridge,
    ElasticNet,
    Scad,
    AdaptiveLasso,
    /// Unpenalized Newton fit.
    Cox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    PartialLikelihood,
    CIndex,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// StudySpec JSON; defaults to the built-in study.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the study seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    replication: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Covariate CSV; edges from partial-correlation tests.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    data: Option<PathBuf>,
    /// StudySpec JSON; the graph of its topology.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the topology seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Test level for data-driven edges.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Edge-list output.
    #[arg(long)]
    out: PathBuf,
}

/// Model and solver flags shared by `fit` and `cv`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Training CSV with `time`, `status` and covariate columns.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Graph)]
    penalty: PenaltyArg,
    /// Edge list over the covariates (graph penalty); defaults to a graph
    /// estimated from the data.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// `k w_k` per line: node weights for `graph` (default √d_k), feature
    /// weights for `adaptive-lasso` (default 1; pilot ridge fit when absent).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Mixing parameter of the elastic net.
    #[arg(long, default_value_t = 0.5)]
    l1_ratio: f64,
    #[arg(long, default_value_t = graphcox::penalty::DEFAULT_SCAD_A)]
    scad_a: f64,
    /// Test level used when the graph is estimated from the data.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Fold-assignment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CriterionArg::PartialLikelihood)]
    criterion: CriterionArg,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Penalty level; cross-validated when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Also write the cross-validation curve here.
    #[arg(long)]
    cv_out: Option<PathBuf>,
    /// Fit JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Fit JSON written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Scores CSV output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with `time` and `status`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    /// Fit JSON; with `--beta0`, adds ℓ2 error and RPE.
    #[arg(long, requires = "beta0")]
    fit: Option<PathBuf>,
    /// JSON array of true coefficients.
    #[arg(long, requires = "fit")]
    beta0: Option<PathBuf>,
    /// Metrics JSON output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// StudySpec or BenchmarkRun JSON; defaults to the built-in study.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated models; defaults to all.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads(cli.threads).and_then(|()| match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Graph(a) => commands::graph(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Cv(a) => commands::cv(a),
        Command::Benchmark(a) => commands::benchmark(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graphcox: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}
