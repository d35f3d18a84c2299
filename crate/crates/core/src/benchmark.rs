//! Simulation benchmark: per replication, tune every model by
//! cross-validation on the training sample, refit, and score on the test
//! sample; then aggregate mean(sd) per model.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{c_index, prediction_errors, MetricRecord, Summary};
use crate::model_selection::{adaptive_lasso_penalty, tune_and_fit, CvPlan, Estimator};
use crate::penalty::{NodeWeights, Penalty, DEFAULT_SCAD_A};
use crate::simulation::{generate_replication, Replication, StudySpec};
use crate::solver::{fit_cox_newton, FitConfig, GraphModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Graph,
    Lasso,
    Ridge,
    ElasticNet,
    Scad,
    AdaptiveLasso,
    Zero,
    CoxUnregularized,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        Self::Graph,
        Self::Lasso,
        Self::Ridge,
        Self::ElasticNet,
        Self::Scad,
        Self::AdaptiveLasso,
        Self::Zero,
        Self::CoxUnregularized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Graph => "graph",
            Self::Lasso => "lasso",
            Self::Ridge => "ridge",
            Self::ElasticNet => "elastic_net",
            Self::Scad => "scad",
            Self::AdaptiveLasso => "adaptive_lasso",
            Self::Zero => "zero",
            Self::CoxUnregularized => "cox_unregularized",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model `{s}`")))
    }
}

/// Iteration cap for benchmark fits. The small-λ end of a 30-point grid on
/// `p ≈ n` data rarely meets the default tolerance within any budget.
pub const BENCHMARK_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkRun {
    pub spec: StudySpec,
    pub models: Vec<ModelKind>,
    /// Solver settings shared by every penalized fit. Defaults to
    /// [`FitConfig::default`] with `max_iter` lowered to
    /// [`BENCHMARK_MAX_ITER`].
    pub fit: FitConfig,
    pub elastic_net_l1_ratio: f64,
    pub scad_a: f64,
}

impl Default for BenchmarkRun {
    fn default() -> Self {
        Self {
            spec: StudySpec::default(),
            models: ModelKind::ALL.to_vec(),
            fit: FitConfig {
                max_iter: BENCHMARK_MAX_ITER,
                ..FitConfig::default()
            },
            elastic_net_l1_ratio: 0.5,
            scad_a: DEFAULT_SCAD_A,
        }
    }
}

impl BenchmarkRun {
    pub fn new(spec: StudySpec, models: Vec<ModelKind>) -> Self {
        Self {
            spec,
            models,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("model list is empty".into()));
        }
        if let Some(m) = self.models.iter().enumerate().find_map(|(i, m)| self.models[..i].contains(m).then_some(m)) {
            return Err(Error::InvalidParameter(format!("model `{m}` listed twice")));
        }
        self.fit.validate()?;
        Penalty::ElasticNet {
            l1_ratio: self.elastic_net_l1_ratio,
        }
        .validate(0)?;
        Penalty::Scad { a: self.scad_a }.validate(0)
    }
}

/// Outcome of one model on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub model: ModelKind,
    /// Selected penalty level; `0` for the unpenalized models.
    pub lambda: f64,
    pub metrics: MetricRecord,
    pub converged: bool,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub l2: Summary,
    pub rpe: Summary,
    pub c_index: Summary,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub run: BenchmarkRun,
    pub rows: Vec<ReplicationRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<ReplicationFailure>,
}

impl StudyReport {
    pub fn summary_for(&self, model: ModelKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.model == model)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut csv = csv::Writer::from_writer(Vec::new());
        csv.write_record([
            "model",
            "l2_mean",
            "l2_sd",
            "rpe_mean",
            "rpe_sd",
            "cindex_mean",
            "cindex_sd",
            "replications",
            "seed",
        ])?;
        for s in &self.summary {
            csv.write_record([
                s.model.name().to_owned(),
                s.l2.mean.to_string(),
                s.l2.sd.to_string(),
                s.rpe.mean.to_string(),
                s.rpe.sd.to_string(),
                s.c_index.mean.to_string(),
                s.c_index.sd.to_string(),
                s.replications.to_string(),
                s.seed.to_string(),
            ])?;
        }
        into_string(csv)
    }

    pub fn replications_csv(&self) -> Result<String> {
        let mut csv = csv::Writer::from_writer(Vec::new());
        csv.write_record(["replication", "model", "lambda", "l2_error", "rpe", "c_index", "converged", "seed"])?;
        for r in &self.rows {
            csv.write_record([
                r.replication.to_string(),
                r.model.name().to_owned(),
                r.lambda.to_string(),
                r.metrics.l2_error.to_string(),
                r.metrics.rpe.to_string(),
                r.metrics.c_index.to_string(),
                r.converged.to_string(),
                self.run.spec.seed.to_string(),
            ])?;
        }
        into_string(csv)
    }

    /// Writes `replications.csv`, `summary.csv`, `report.json` and
    /// `manifest.json` into `dir`, returning the paths written.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let files = [
            ("replications.csv", self.replications_csv()?),
            ("summary.csv", self.summary_csv()?),
            ("report.json", serde_json::to_string_pretty(self)? + "\n"),
        ];
        let mut written = Vec::new();
        for (name, body) in &files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        let manifest = Manifest {
            files: files.iter().map(|(n, _)| n.to_string()).collect(),
            seed: self.run.spec.seed,
            replications_requested: self.run.spec.replications,
            replications_completed: self.run.spec.replications - self.failures.len(),
            failures: self.failures.clone(),
            nonconverged_fits: self.rows.iter().filter(|r| !r.converged).count(),
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        written.push(path);
        Ok(written)
    }
}

#[derive(Debug, Serialize)]
struct Manifest {
    files: Vec<String>,
    seed: u64,
    replications_requested: usize,
    replications_completed: usize,
    failures: Vec<ReplicationFailure>,
    nonconverged_fits: usize,
}

fn into_string(csv: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidData(e.to_string()))
}

fn score(rep: &Replication, beta: &DVector<f64>) -> Result<MetricRecord> {
    let (l2_error, rpe) = prediction_errors(beta, &rep.beta0, rep.test.covariates())?;
    let scores = rep.test.linear_predictor(beta)?;
    Ok(MetricRecord {
        l2_error,
        rpe,
        c_index: c_index(scores.as_slice(), rep.test.times(), rep.test.status())?,
    })
}

fn tune(rep: &Replication, estimator: &Estimator, plan: &CvPlan) -> Result<(f64, DVector<f64>, bool)> {
    let (cv, fit) = tune_and_fit(&rep.train, estimator, plan)?;
    Ok((cv.best_lambda, fit.beta, fit.converged))
}

/// Graph estimator for a replication, with node weights from the study's
/// tau rule.
pub fn graph_estimator(spec: &StudySpec, rep: &Replication) -> Result<Estimator> {
    let weights = NodeWeights::from_rule(spec.tau_rule, &rep.graph);
    Ok(Estimator::Graph(GraphModel::new(&rep.graph, weights)?))
}

/// Runs every model of `run` on replication `index`.
pub fn run_replication(run: &BenchmarkRun, index: usize) -> Result<Vec<ReplicationRow>> {
    let spec = &run.spec;
    let rep = generate_replication(spec, index)?;
    let plan = CvPlan {
        grid: spec.lambda_grid,
        criterion: spec.criterion,
        fit: run.fit.clone(),
        ..CvPlan::new(&rep.train, spec.folds, rep.cv_seed)?
    };
    run.models
        .iter()
        .map(|&model| {
            let (lambda, beta, converged) = match model {
                ModelKind::Zero => (0.0, DVector::zeros(rep.train.p()), true),
                ModelKind::CoxUnregularized => {
                    let fit = fit_cox_newton(&rep.train, &run.fit)?;
                    (0.0, fit.beta, fit.converged)
                }
                ModelKind::Graph => tune(&rep, &graph_estimator(spec, &rep)?, &plan)?,
                ModelKind::Lasso => tune(&rep, &Estimator::Penalized(Penalty::Lasso), &plan)?,
                ModelKind::Ridge => tune(&rep, &Estimator::Penalized(Penalty::Ridge), &plan)?,
                ModelKind::ElasticNet => {
                    let penalty = Penalty::ElasticNet {
                        l1_ratio: run.elastic_net_l1_ratio,
                    };
                    tune(&rep, &Estimator::Penalized(penalty), &plan)?
                }
                ModelKind::Scad => {
                    tune(&rep, &Estimator::Penalized(Penalty::Scad { a: run.scad_a }), &plan)?
                }
                ModelKind::AdaptiveLasso => {
                    let penalty = adaptive_lasso_penalty(&rep.train, &plan)?;
                    tune(&rep, &Estimator::Penalized(penalty), &plan)?
                }
            };
            Ok(ReplicationRow {
                replication: index,
                model,
                lambda,
                metrics: score(&rep, &beta)?,
                converged,
                beta: beta.iter().copied().collect(),
            })
        })
        .collect()
}

/// Runs all replications in parallel on the current rayon pool. A failing
/// replication is recorded in `failures` and excluded from the summary.
pub fn run_benchmark(run: &BenchmarkRun) -> Result<StudyReport> {
    run.validate()?;
    let outcomes: Vec<Result<Vec<ReplicationRow>>> = (0..run.spec.replications)
        .into_par_iter()
        .map(|r| run_replication(run, r))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (replication, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => {
                log::error!("replication {replication} failed: {e}");
                failures.push(ReplicationFailure {
                    replication,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = run
        .models
        .iter()
        .map(|&model| {
            let of = |f: fn(&MetricRecord) -> f64| {
                let values: Vec<f64> = rows.iter().filter(|r| r.model == model).map(|r| f(&r.metrics)).collect();
                Summary::of(&values)
            };
            let l2 = of(|m| m.l2_error);
            SummaryRow {
                model,
                replications: l2.count,
                l2,
                rpe: of(|m| m.rpe),
                c_index: of(|m| m.c_index),
                seed: run.spec.seed,
            }
        })
        .collect();
    Ok(StudyReport {
        run: run.clone(),
        rows,
        summary,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("fused_lasso".parse::<ModelKind>().is_err());
    }

    #[test]
    fn run_validation() {
        let mut run = BenchmarkRun::new(StudySpec::default(), vec![]);
        assert!(run.validate().is_err());
        run.models = vec![ModelKind::Zero, ModelKind::Zero];
        assert!(run.validate().is_err());
        run.models = vec![ModelKind::Zero];
        assert!(run.validate().is_ok());
    }
}
