mod common;

use common::*;
use graphcox::model_selection::{adaptive_lasso_penalty, make_folds};
use graphcox::simulation::simulate_survival;
use graphcox::{
    c_index, cross_validate, CvCriterion, CvPlan, Estimator, FitConfig, GraphModel, LambdaGrid, NodeWeights, Penalty,
    PredictorGraph, SurvivalDataset, TauRule,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn simulated(seed: u64, n: usize, beta0: &DVector<f64>) -> SurvivalDataset {
    let mut r = rng(seed);
    let x = DMatrix::from_fn(n, beta0.len(), |_, _| normal(&mut r));
    simulate_survival(&x, beta0, 0.3, seed + 1).unwrap()
}

fn small_grid(plan: CvPlan) -> CvPlan {
    CvPlan {
        grid: LambdaGrid { count: 12, min_ratio: 1e-2 },
        ..plan
    }
}

#[test]
fn leave_one_out_matches_refit_loop() {
    let mut r = rng(1);
    let x = DMatrix::from_fn(12, 3, |_, _| normal(&mut r));
    let times: Vec<f64> = (0..12).map(|i| 1.0 + i as f64 + 0.1 * normal(&mut r).abs()).collect();
    let data = SurvivalDataset::new(times, vec![true; 12], x).unwrap();
    let graph = PredictorGraph::new(3, [(0, 1)]).unwrap();
    let model = GraphModel::new(&graph, NodeWeights::from_rule(TauRule::SqrtDegree, &graph)).unwrap();
    let estimator = Estimator::Graph(model);
    let plan = CvPlan {
        grid: LambdaGrid { count: 6, min_ratio: 0.05 },
        ..CvPlan::with_folds((0..12).collect(), 12)
    };
    let cv = cross_validate(&data, &estimator, &plan).unwrap();

    let lambdas = cv.lambda_grid.clone();
    assert_eq!(lambdas[0], estimator.lambda_max(&data).unwrap());
    let mut curve = vec![0.0; lambdas.len()];
    for i in 0..12 {
        let keep: Vec<usize> = (0..12).filter(|&j| j != i).collect();
        let train = data.subset(&keep).unwrap();
        let path = estimator.fit_path(&train, &lambdas, &plan.fit).unwrap();
        for (c, fit) in curve.iter_mut().zip(&path) {
            let full = -(12.0) * naive_nll(&fit.beta, &data);
            let without = -(11.0) * naive_nll(&fit.beta, &train);
            *c += full - without;
        }
    }
    for (a, b) in cv.criterion.iter().zip(&curve) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    let best = curve.iter().enumerate().fold(0, |best, (i, c)| if *c > curve[best] { i } else { best });
    assert_eq!(cv.best_lambda, lambdas[best]);
}

#[test]
fn null_data_prefers_heavy_shrinkage() {
    let mut top_quartile = 0;
    for seed in 0..50 {
        let data = simulated(100 + seed, 100, &DVector::zeros(5));
        let plan = CvPlan::new(&data, 5, seed).unwrap();
        let cv = cross_validate(&data, &Estimator::Penalized(Penalty::Lasso), &plan).unwrap();
        if cv.best_index() < plan.grid.count / 4 {
            top_quartile += 1;
        }
    }
    assert!(top_quartile >= 35, "{top_quartile}/50");
}

#[test]
fn strong_signal_beats_null_end_of_grid() {
    let beta0 = DVector::from_fn(10, |j, _| if j < 3 { 1.0 } else { 0.0 });
    let train = simulated(7, 400, &beta0);
    let test = simulated(8, 400, &beta0);
    let estimator = Estimator::Penalized(Penalty::Lasso);
    for criterion in [CvCriterion::CvPartialLikelihood, CvCriterion::CvCIndex] {
        let plan = CvPlan {
            criterion,
            ..small_grid(CvPlan::new(&train, 5, 3).unwrap())
        };
        let cv = cross_validate(&train, &estimator, &plan).unwrap();
        let score = |lambda: f64| {
            let fit = estimator.fit(&train, &FitConfig::with_lambda(lambda), None).unwrap();
            let s = test.linear_predictor(&fit.beta).unwrap();
            c_index(s.as_slice(), test.times(), test.status()).unwrap()
        };
        assert!(score(cv.best_lambda) > score(cv.lambda_grid[0]) + 0.1);
    }
}

#[test]
fn curve_is_bit_reproducible_across_thread_counts() {
    let beta0 = DVector::from_fn(6, |j, _| if j < 2 { 0.7 } else { 0.0 });
    let data = simulated(9, 120, &beta0);
    let graph = PredictorGraph::new(6, [(0, 1), (1, 2), (4, 5)]).unwrap();
    let estimator = Estimator::Graph(GraphModel::new(&graph, NodeWeights::from_rule(TauRule::SqrtDegree, &graph)).unwrap());
    let plan = small_grid(CvPlan::new(&data, 5, 42).unwrap());
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cross_validate(&data, &estimator, &plan).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
}

#[test]
fn result_json_shape() {
    let data = simulated(10, 60, &DVector::from_vec(vec![1.0, 0.0]));
    let plan = small_grid(CvPlan::new(&data, 3, 0).unwrap());
    let cv = cross_validate(&data, &Estimator::Penalized(Penalty::Ridge), &plan).unwrap();
    let json: serde_json::Value = serde_json::to_value(&cv).unwrap();
    assert_eq!(json["lambda_grid"].as_array().unwrap().len(), 12);
    assert_eq!(json["criterion"].as_array().unwrap().len(), 12);
    assert!(json["best_lambda"].is_f64());
}

#[test]
fn adaptive_pilot_weights_are_positive() {
    let data = simulated(11, 80, &DVector::from_vec(vec![1.0, -0.5, 0.0]));
    let plan = small_grid(CvPlan::new(&data, 4, 0).unwrap());
    let Penalty::AdaptiveLasso { weights } = adaptive_lasso_penalty(&data, &plan).unwrap() else {
        panic!("expected adaptive lasso");
    };
    assert_eq!(weights.len(), 3);
    assert!(weights.iter().all(|w| *w > 0.0 && w.is_finite()));
    // the signal coordinate is penalized less than the null one
    assert!(weights[0] < weights[2]);
}

#[test]
fn invalid_plans_are_rejected() {
    let data = simulated(12, 30, &DVector::from_vec(vec![1.0]));
    let mut plan = CvPlan::new(&data, 3, 0).unwrap();
    plan.folds[0] = 7;
    assert!(cross_validate(&data, &Estimator::Penalized(Penalty::Lasso), &plan).is_err());
    let censored_fold: Vec<usize> = data.status().iter().map(|&s| if s { 0 } else { 1 }).collect();
    let plan = CvPlan::with_folds(censored_fold, 2);
    assert!(cross_validate(&data, &Estimator::Penalized(Penalty::Lasso), &plan).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn folds_are_stratified_and_deterministic(seed in any::<u64>(), n in 10usize..200, k in 2usize..10, censor in 0.0f64..0.7) {
        let mut r = rng(seed);
        let status: Vec<bool> = (0..n).map(|_| rand::Rng::random_bool(&mut r, 1.0 - censor)).collect();
        let events = status.iter().filter(|&&s| s).count();
        match make_folds(&status, k, seed) {
            Ok(folds) => {
                prop_assert_eq!(folds.len(), n);
                let mut per_fold = vec![0usize; k];
                for (f, s) in folds.iter().zip(&status) {
                    prop_assert!(*f < k);
                    per_fold[*f] += *s as usize;
                }
                let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
                prop_assert!(*lo >= 1);
                prop_assert_eq!(folds, make_folds(&status, k, seed).unwrap());
            }
            Err(_) => prop_assert!(events < k || k > n),
        }
    }
}
