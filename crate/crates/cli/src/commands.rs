use std::fs;
use std::path::Path;

use graphcox::benchmark::ModelKind;
use graphcox::io::{read_covariates, read_dataset, read_scores, write_dataset, write_scores};
use graphcox::model_selection::adaptive_lasso_penalty;
use graphcox::{
    c_index, cross_validate, fit_cox_newton, generate_graph, generate_replication, graph_from_data,
    prediction_errors, run_benchmark, tune_and_fit, BenchmarkRun, CvCriterion, CvPlan, Estimator,
    FitConfig, FitRecord, GraphModel, NodeWeights, Penalty, PredictorGraph, StudySpec,
    SurvivalDataset, TauRule,
};
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{at_path, io_context, CliError, CliResult};
use crate::{
    BenchmarkArgs, CriterionArg, CvArgs, EvaluateArgs, FitArgs, GraphArgs, ModelArgs, PenaltyArg,
    PredictArgs, SimulateArgs,
};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(io_context(path))
}

fn write_json(value: &impl Serialize, path: &Path) -> CliResult {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(io_context(path))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(io_context(path))
}

fn load_spec(path: Option<&Path>) -> CliResult<StudySpec> {
    match path {
        Some(p) => Ok(StudySpec::from_json(&read_text(p)?)?),
        None => Ok(StudySpec::default()),
    }
}

/// `k tau_k` pairs; unlisted nodes keep their default.
fn read_weights(path: &Path, defaults: &NodeWeights) -> CliResult<NodeWeights> {
    NodeWeights::read(path, defaults).map_err(at_path(path))
}

fn read_fit(path: &Path) -> CliResult<FitRecord> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

#[derive(Serialize)]
struct ReplicationInfo {
    index: usize,
    seed: u64,
    cv_seed: u64,
    folds: usize,
    p: usize,
    n_train: usize,
    n_test: usize,
    precision_repaired: bool,
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let mut spec = load_spec(args.spec.as_deref())?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let rep = generate_replication(&spec, args.replication)?;
    create_dir(&args.out)?;
    write_dataset(&rep.train, args.out.join("train.csv"))?;
    write_dataset(&rep.test, args.out.join("test.csv"))?;
    rep.graph.write_edge_list(args.out.join("graph.txt"))?;
    write_json(&rep.beta0.as_slice(), &args.out.join("beta0.json"))?;
    let info = ReplicationInfo {
        index: rep.index,
        seed: spec.seed,
        cv_seed: rep.cv_seed,
        folds: spec.folds,
        p: rep.beta0.len(),
        n_train: rep.train.n(),
        n_test: rep.test.n(),
        precision_repaired: rep.precision.repaired(),
    };
    write_json(&info, &args.out.join("replication.json"))
}

pub fn graph(args: GraphArgs) -> CliResult {
    let graph = match (&args.data, &args.spec) {
        (Some(data), _) => {
            let (_, x) = read_covariates(data).map_err(at_path(data))?;
            graph_from_data(&x, args.alpha)?
        }
        (None, spec) => {
            let mut topology = load_spec(spec.as_deref())?.topology;
            if let Some(seed) = args.seed {
                topology = topology.with_seed(seed);
            }
            generate_graph(&topology)?
        }
    };
    log::info!("{} nodes, {} edges", graph.p(), graph.edge_count());
    graph.write_edge_list(&args.out)?;
    Ok(())
}

fn base_config(model: &ModelArgs) -> FitConfig {
    let mut config = FitConfig::default();
    if let Some(m) = model.max_iter {
        config.max_iter = m;
    }
    if let Some(t) = model.tol {
        config.tol = t;
    }
    config
}

fn plan(model: &ModelArgs, data: &SurvivalDataset) -> CliResult<CvPlan> {
    let criterion = match model.criterion {
        CriterionArg::PartialLikelihood => CvCriterion::CvPartialLikelihood,
        CriterionArg::CIndex => CvCriterion::CvCIndex,
    };
    Ok(CvPlan {
        criterion,
        fit: base_config(model),
        ..CvPlan::new(data, model.folds, model.seed)?
    })
}

fn predictor_graph(model: &ModelArgs, data: &SurvivalDataset) -> CliResult<PredictorGraph> {
    match &model.graph {
        Some(path) => Ok(PredictorGraph::read_edge_list(data.p(), path).map_err(at_path(path))?),
        None => Ok(graph_from_data(data.covariates(), model.alpha)?),
    }
}

fn estimator(model: &ModelArgs, data: &SurvivalDataset) -> CliResult<Estimator> {
    let penalty = match model.penalty {
        PenaltyArg::Graph => {
            let graph = predictor_graph(model, data)?;
            let defaults = NodeWeights::from_rule(TauRule::default(), &graph);
            let weights = match &model.weights {
                Some(path) => read_weights(path, &defaults)?,
                None => defaults,
            };
            return Ok(Estimator::Graph(GraphModel::new(&graph, weights)?));
        }
        PenaltyArg::Lasso => Penalty::Lasso,
        PenaltyArg::Ridge => Penalty::Ridge,
        PenaltyArg::ElasticNet => Penalty::ElasticNet {
            l1_ratio: model.l1_ratio,
        },
        PenaltyArg::Scad => Penalty::Scad { a: model.scad_a },
        PenaltyArg::AdaptiveLasso => match &model.weights {
            Some(path) => Penalty::AdaptiveLasso {
                weights: read_weights(path, &NodeWeights::uniform(data.p(), 1.0)?)?
                    .as_slice()
                    .to_vec(),
            },
            None => adaptive_lasso_penalty(data, &plan(model, data)?)?,
        },
        PenaltyArg::Cox => {
            return Err(CliError::Usage(
                "the unpenalized model has no λ to tune".into(),
            ))
        }
    };
    penalty.validate(data.p())?;
    Ok(Estimator::Penalized(penalty))
}

pub fn fit(args: FitArgs) -> CliResult {
    let data = read_dataset(&args.model.data).map_err(at_path(&args.model.data))?;
    let fit = if args.model.penalty == PenaltyArg::Cox {
        fit_cox_newton(&data, &base_config(&args.model))?
    } else {
        let estimator = estimator(&args.model, &data)?;
        match args.lambda {
            Some(lambda) => {
                let config = FitConfig {
                    lambda,
                    ..base_config(&args.model)
                };
                estimator.fit(&data, &config, None)?
            }
            None => {
                let (cv, fit) = tune_and_fit(&data, &estimator, &plan(&args.model, &data)?)?;
                log::info!("selected lambda = {}", cv.best_lambda);
                if let Some(path) = &args.cv_out {
                    write_json(&cv, path)?;
                }
                fit
            }
        }
    };
    write_json(&fit.to_record(data.feature_names()), &args.out)?;
    if fit.diverged {
        return Err(CliError::Convergence(format!(
            "coefficients diverged after {} iterations; fit written to {}",
            fit.iterations,
            args.out.display()
        )));
    }
    if !fit.converged {
        return Err(CliError::Convergence(format!(
            "no convergence within {} iterations; best iterate written to {}",
            fit.iterations,
            args.out.display()
        )));
    }
    Ok(())
}

pub fn cv(args: CvArgs) -> CliResult {
    let data = read_dataset(&args.model.data).map_err(at_path(&args.model.data))?;
    let estimator = estimator(&args.model, &data)?;
    let result = cross_validate(&data, &estimator, &plan(&args.model, &data)?)?;
    write_json(&result, &args.out)
}

pub fn predict(args: PredictArgs) -> CliResult {
    let record = read_fit(&args.fit)?;
    let (names, x) = read_covariates(&args.data).map_err(at_path(&args.data))?;
    if !record.feature_names.is_empty() && record.feature_names != names {
        return Err(CliError::Data(format!(
            "covariate columns of {} do not match the fitted features",
            args.data.display()
        )));
    }
    if x.ncols() != record.beta.len() {
        return Err(CliError::Data(format!(
            "{} covariates but the fit has {} coefficients",
            x.ncols(),
            record.beta.len()
        )));
    }
    let scores = x * record.beta();
    write_scores(scores.as_slice(), &args.out)?;
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    c_index: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rpe: Option<f64>,
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    let data = read_dataset(&args.data).map_err(at_path(&args.data))?;
    let scores = read_scores(&args.scores).map_err(at_path(&args.scores))?;
    if scores.len() != data.n() {
        return Err(CliError::Data(format!(
            "{} scores for {} observations",
            scores.len(),
            data.n()
        )));
    }
    let mut evaluation = Evaluation {
        c_index: c_index(&scores, data.times(), data.status())?,
        l2_error: None,
        rpe: None,
    };
    if let (Some(fit), Some(beta0)) = (&args.fit, &args.beta0) {
        let beta_hat = read_fit(fit)?.beta();
        let beta0: Vec<f64> = serde_json::from_str(&read_text(beta0)?)?;
        let (l2, rpe) = prediction_errors(&beta_hat, &DVector::from_vec(beta0), data.covariates())?;
        evaluation.l2_error = Some(l2);
        evaluation.rpe = Some(rpe);
    }
    match &args.out {
        Some(path) => write_json(&evaluation, path),
        None => {
            println!("{}", serde_json::to_string_pretty(&evaluation)?);
            Ok(())
        }
    }
}

/// Reads either a full `BenchmarkRun` or a bare `StudySpec`.
fn load_run(path: Option<&Path>) -> CliResult<BenchmarkRun> {
    let Some(path) = path else {
        return Ok(BenchmarkRun::default());
    };
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("spec").is_some() {
        Ok(serde_json::from_value(value)?)
    } else {
        Ok(BenchmarkRun::new(
            StudySpec::from_json(&text)?,
            ModelKind::ALL.to_vec(),
        ))
    }
}

pub fn benchmark(args: BenchmarkArgs) -> CliResult {
    let mut run = load_run(args.spec.as_deref())?;
    if !args.models.is_empty() {
        run.models = args
            .models
            .iter()
            .map(|m| m.trim().parse::<ModelKind>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(seed) = args.seed {
        run.spec.seed = seed;
    }
    if let Some(r) = args.replications {
        run.spec.replications = r;
    }
    if let Some(m) = args.max_iter {
        run.fit.max_iter = m;
    }
    if let Some(t) = args.tol {
        run.fit.tol = t;
    }
    run.validate()?;
    create_dir(&args.out)?;

    let report = run_benchmark(&run)?;
    report.write(&args.out)?;
    print!("{}", report.summary_csv()?);

    let nonconverged = report.rows.iter().filter(|r| !r.converged).count();
    if nonconverged > 0 {
        log::warn!("{nonconverged} final fits stopped at the iteration cap");
    }
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("replication {} failed: {}", f.replication, f.error);
        }
        return Err(CliError::Convergence(format!(
            "{} of {} replications failed; partial report in {}",
            report.failures.len(),
            run.spec.replications,
            args.out.display()
        )));
    }
    Ok(())
}
