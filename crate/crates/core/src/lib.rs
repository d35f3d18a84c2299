//! Cox proportional-hazards regression with a graph-structured latent-group
//! penalty on the coefficients.
//!
//! The penalty `‖β‖_{G,τ} = min Σ_k τ_k ‖V^(k)‖₂` over decompositions
//! `β = Σ_k V^(k)` with `V^(k)` supported on the closed neighborhood of node
//! `k` is fitted by duplicating predictors per neighborhood, which turns it
//! into an ordinary group lasso solved by accelerated proximal gradient.
//!
//! ```
//! use graphcox::{fit_graph_cox, FitConfig, PredictorGraph, SurvivalDataset};
//! use nalgebra::DMatrix;
//!
//! let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.1, -0.3, 0.8, 1.2, -0.4, 0.0, 0.3]);
//! let data = SurvivalDataset::new(vec![3.0, 1.0, 2.0, 4.0], vec![true, true, false, true], x).unwrap();
//! let graph = PredictorGraph::new(2, [(0, 1)]).unwrap();
//! let fit = fit_graph_cox(&data, &graph, &FitConfig::with_lambda(0.05)).unwrap();
//! assert!(fit.converged);
//! ```

pub mod benchmark;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model_selection;
pub mod penalty;
pub mod simulation;
pub mod solver;
pub mod survival;

pub use benchmark::{run_benchmark, BenchmarkRun, ModelKind, StudyReport};
pub use error::{Error, Result};
pub use graph::{generate_graph, graph_from_data, GraphTopologySpec, PredictorGraph};
pub use metrics::{c_index, prediction_errors, MetricRecord, Summary};
pub use model_selection::{cross_validate, tune_and_fit, CvCriterion, CvPlan, CvResult, Estimator, LambdaGrid};
pub use penalty::{
    duplicate_design, graph_norm, DuplicatedDesign, GroupLayout, LatentDecomposition, NodeWeights, Penalty, TauRule,
};
pub use simulation::{generate_replication, PrecisionMatrix, StudySpec};
pub use solver::{
    fit_cox_newton, fit_graph_cox, fit_penalized_cox, lambda_max, FitConfig, FitRecord, FitResult, GraphModel,
};
pub use survival::{negative_partial_log_likelihood, partial_gradient, partial_hessian, SurvivalDataset};
