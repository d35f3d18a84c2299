//! Fitting penalized Cox models.
//!
//! * [`fit_graph_cox`]: graph-norm penalty, solved as a group lasso on the
//!   duplicated design.
//! * [`fit_penalized_cox`]: lasso, ridge, elastic net, SCAD, adaptive lasso
//!   and plain group lasso on the original coefficients.
//! * [`fit_cox_newton`]: unpenalized maximum partial likelihood.

mod newton;
mod proximal;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::graph::PredictorGraph;
use crate::penalty::{penalty_prox, GroupLayout, LatentDecomposition, NodeWeights, Penalty, TauRule};
use crate::survival::{negative_partial_log_likelihood, partial_gradient, value_and_gradient, SurvivalDataset};

pub use newton::{fit_cox_newton, DIVERGENCE_BOUND};
use proximal::{minimize, CompositeProblem, Settings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Penalty level `λ ≥ 0`.
    pub lambda: f64,
    /// Node weights for graph fits; `None` applies `tau_rule`.
    pub weights: Option<NodeWeights>,
    pub tau_rule: TauRule,
    pub max_iter: usize,
    /// Threshold on both the relative objective change and the norm of the
    /// composite gradient map.
    pub tol: f64,
    /// Backtracking shrink factor in `(0, 1)`.
    pub shrink: f64,
    pub initial_step: f64,
    /// FISTA momentum with function-value restart.
    pub acceleration: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            weights: None,
            tau_rule: TauRule::default(),
            max_iter: 5000,
            tol: 1e-7,
            shrink: 0.5,
            initial_step: 1.0,
            acceleration: true,
        }
    }
}

impl FitConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial step must be > 0, got {}",
                self.initial_step
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn settings(&self) -> Settings {
        Settings {
            max_iter: self.max_iter,
            tol: self.tol,
            shrink: self.shrink,
            initial_step: self.initial_step,
            acceleration: self.acceleration,
        }
    }

    fn resolve_weights(&self, graph: &PredictorGraph) -> Result<NodeWeights> {
        let weights = match &self.weights {
            Some(w) => w.clone(),
            None => NodeWeights::from_rule(self.tau_rule, graph),
        };
        ensure_len("node weights", graph.p(), weights.len())?;
        Ok(weights)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta: DVector<f64>,
    /// `V^(1..p)` for graph fits.
    pub decomposition: Option<LatentDecomposition>,
    /// Stacked group coefficients for graph fits (warm-start state).
    pub expanded: Option<DVector<f64>>,
    /// Objective after every accepted iterate, starting at the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Newton fits only: coefficients ran away (no finite maximizer).
    pub diverged: bool,
    pub lambda: f64,
    pub penalty: String,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    pub fn to_record(&self, feature_names: &[String]) -> FitRecord {
        FitRecord {
            beta: self.beta.iter().copied().collect(),
            converged: self.converged,
            iterations: self.iterations,
            objective: self.objective_trace.clone(),
            lambda: self.lambda,
            penalty: self.penalty.clone(),
            diverged: self.diverged,
            feature_names: feature_names.to_vec(),
        }
    }
}

/// JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: Vec<f64>,
    pub lambda: f64,
    pub penalty: String,
    #[serde(default)]
    pub diverged: bool,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

impl FitRecord {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta)
    }
}

/// A predictor graph prepared for repeated fits: the duplicated-design
/// layout and the node weights.
#[derive(Debug, Clone)]
pub struct GraphModel {
    layout: GroupLayout,
    weights: NodeWeights,
}

struct GraphProblem<'a> {
    data: &'a SurvivalDataset,
    model: &'a GraphModel,
    lambda: f64,
}

impl CompositeProblem for GraphProblem<'_> {
    fn smooth_value(&self, v: &DVector<f64>) -> Result<f64> {
        negative_partial_log_likelihood(&self.model.layout.collapse(v)?, self.data)
    }

    fn smooth_gradient(&self, v: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (value, grad) = value_and_gradient(&self.model.layout.collapse(v)?, self.data)?;
        Ok((value, self.model.layout.gather(&grad)?))
    }

    fn nonsmooth(&self, v: &DVector<f64>) -> f64 {
        self.lambda * self.model.layout.weighted_group_norm(v, &self.model.weights)
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        self.model.layout.prox(v, &self.model.weights, step * self.lambda)
    }
}

impl GraphModel {
    pub fn new(graph: &PredictorGraph, weights: NodeWeights) -> Result<Self> {
        Self::from_layout(GroupLayout::from_graph(graph), weights)
    }

    pub fn from_layout(layout: GroupLayout, weights: NodeWeights) -> Result<Self> {
        layout.check_weights(&weights)?;
        Ok(Self { layout, weights })
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn weights(&self) -> &NodeWeights {
        &self.weights
    }

    /// Smallest `λ` at which all-zero group coefficients are optimal:
    /// `max_k ‖∇f(0)_{N_k}‖₂ / τ_k`.
    pub fn lambda_max(&self, data: &SurvivalDataset) -> Result<f64> {
        ensure_len("dataset features", self.layout.p(), data.p())?;
        let grad = partial_gradient(&DVector::zeros(data.p()), data)?;
        Ok(self
            .layout
            .groups()
            .iter()
            .map(|g| g.members.iter().map(|&j| grad[j] * grad[j]).sum::<f64>().sqrt() / self.weights.as_slice()[g.node])
            .fold(0.0, f64::max)
            * LAMBDA_MAX_ROUNDING)
    }

    /// Fits at `config.lambda`, optionally warm-started from stacked group
    /// coefficients of a previous fit.
    pub fn fit(&self, data: &SurvivalDataset, config: &FitConfig, warm: Option<&DVector<f64>>) -> Result<FitResult> {
        config.validate()?;
        ensure_len("dataset features", self.layout.p(), data.p())?;
        let start = match warm {
            Some(v) => {
                ensure_len("warm start", self.layout.dim(), v.len())?;
                v.clone()
            }
            None => DVector::zeros(self.layout.dim()),
        };
        let problem = GraphProblem {
            data,
            model: self,
            lambda: config.lambda,
        };
        let out = minimize(&problem, start, &config.settings())?;
        if !out.converged {
            log::debug!("graph fit hit max_iter = {} at lambda = {}", config.max_iter, config.lambda);
        }
        let beta = self.layout.collapse(&out.w)?;
        Ok(FitResult {
            beta,
            decomposition: Some(self.layout.decompose(&out.w)?),
            expanded: Some(out.w),
            objective_trace: out.trace,
            iterations: out.iterations,
            converged: out.converged,
            diverged: false,
            lambda: config.lambda,
            penalty: "graph".into(),
        })
    }
}

/// Minimizes `-(1/n)ℓ(Σ_k V^(k)) + λ Σ_k τ_k ‖V^(k)‖₂` by proximal gradient
/// on the duplicated design.
pub fn fit_graph_cox(data: &SurvivalDataset, graph: &PredictorGraph, config: &FitConfig) -> Result<FitResult> {
    ensure_len("graph node count", data.p(), graph.p())?;
    let model = GraphModel::new(graph, config.resolve_weights(graph)?)?;
    model.fit(data, config, None)
}

pub fn lambda_max(data: &SurvivalDataset, graph: &PredictorGraph, weights: &NodeWeights) -> Result<f64> {
    ensure_len("graph node count", data.p(), graph.p())?;
    GraphModel::new(graph, weights.clone())?.lambda_max(data)
}

struct PenalizedProblem<'a> {
    data: &'a SurvivalDataset,
    penalty: &'a Penalty,
    lambda: f64,
}

impl PenalizedProblem<'_> {
    fn ridge(&self) -> f64 {
        if matches!(self.penalty, Penalty::Ridge) {
            self.lambda
        } else {
            0.0
        }
    }
}

impl CompositeProblem for PenalizedProblem<'_> {
    fn smooth_value(&self, beta: &DVector<f64>) -> Result<f64> {
        Ok(negative_partial_log_likelihood(beta, self.data)? + 0.5 * self.ridge() * beta.norm_squared())
    }

    fn smooth_gradient(&self, beta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (value, mut grad) = value_and_gradient(beta, self.data)?;
        let ridge = self.ridge();
        if ridge > 0.0 {
            grad.axpy(ridge, beta, 1.0);
        }
        Ok((value + 0.5 * ridge * beta.norm_squared(), grad))
    }

    fn nonsmooth(&self, beta: &DVector<f64>) -> f64 {
        match self.penalty {
            Penalty::Ridge => 0.0,
            other => other.value(self.lambda, beta),
        }
    }

    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        match self.penalty {
            Penalty::Ridge => v.clone(),
            other => penalty_prox(other, self.lambda, v, step).expect("validated before fitting"),
        }
    }
}

/// Proximal-gradient fit with one of the classical penalties.
pub fn fit_penalized_cox(
    data: &SurvivalDataset,
    penalty: &Penalty,
    config: &FitConfig,
    warm: Option<&DVector<f64>>,
) -> Result<FitResult> {
    config.validate()?;
    penalty.validate(data.p())?;
    let start = match warm {
        Some(b) => {
            ensure_len("warm start", data.p(), b.len())?;
            b.clone()
        }
        None => DVector::zeros(data.p()),
    };
    let problem = PenalizedProblem {
        data,
        penalty,
        lambda: config.lambda,
    };
    let out = minimize(&problem, start, &config.settings())?;
    Ok(FitResult {
        beta: out.w,
        decomposition: None,
        expanded: None,
        objective_trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
        diverged: false,
        lambda: config.lambda,
        penalty: penalty.name().into(),
    })
}

/// Grid anchor for a classical penalty: the smallest `λ` with `β = 0`
/// optimal, or for ridge (never exactly zero) `20 ‖∇f(0)‖_∞`.
pub fn penalty_lambda_max(data: &SurvivalDataset, penalty: &Penalty) -> Result<f64> {
    penalty.validate(data.p())?;
    let grad = partial_gradient(&DVector::zeros(data.p()), data)?;
    let sup = grad.amax();
    let lmax = match penalty {
        Penalty::Lasso | Penalty::Scad { .. } => sup,
        Penalty::Ridge => 20.0 * sup,
        Penalty::ElasticNet { l1_ratio } => sup / l1_ratio,
        Penalty::AdaptiveLasso { weights } => grad
            .iter()
            .zip(weights)
            .map(|(g, w)| if *w > 0.0 { g.abs() / w } else { 0.0 })
            .fold(0.0, f64::max),
        Penalty::GroupLasso { groups, weights } => groups
            .iter()
            .zip(weights)
            .map(|(g, w)| {
                let norm = g.iter().map(|&j| grad[j] * grad[j]).sum::<f64>().sqrt();
                if *w > 0.0 {
                    norm / w
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max),
    };
    Ok(lmax * LAMBDA_MAX_ROUNDING)
}

/// Rounds λ_max up by a few ulps so that fitting at exactly λ_max lands on
/// the thresholded side of the prox.
const LAMBDA_MAX_ROUNDING: f64 = 1.0 + 16.0 * f64::EPSILON;
