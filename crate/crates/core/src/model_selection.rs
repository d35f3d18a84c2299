//! K-fold cross-validation of the penalty level.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::metrics::c_index;
use crate::penalty::Penalty;
use crate::solver::{fit_penalized_cox, penalty_lambda_max, FitConfig, FitResult, GraphModel};
use crate::survival::{negative_partial_log_likelihood, SurvivalDataset};

/// Log-spaced grid from `λ_max` down to `min_ratio · λ_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaGrid {
    pub count: usize,
    pub min_ratio: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            count: 30,
            min_ratio: 1e-3,
        }
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("lambda grid needs at least one point".into()));
        }
        if !(self.min_ratio > 0.0 && self.min_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda grid min_ratio must lie in (0, 1], got {}",
                self.min_ratio
            )));
        }
        Ok(())
    }

    /// Descending values; the first is exactly `lambda_max`.
    pub fn values(&self, lambda_max: f64) -> Vec<f64> {
        if self.count == 1 {
            return vec![lambda_max];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| lambda_max * self.min_ratio.powf(i as f64 / last))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvCriterion {
    /// Summed held-out partial log-likelihood contributions.
    #[default]
    CvPartialLikelihood,
    /// Mean held-out c-index.
    CvCIndex,
}

/// A penalized Cox estimator whose level `λ` is to be tuned.
#[derive(Debug, Clone)]
pub enum Estimator {
    Graph(GraphModel),
    Penalized(Penalty),
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Graph(_) => "graph",
            Self::Penalized(p) => p.name(),
        }
    }

    pub fn lambda_max(&self, data: &SurvivalDataset) -> Result<f64> {
        match self {
            Self::Graph(model) => model.lambda_max(data),
            Self::Penalized(penalty) => penalty_lambda_max(data, penalty),
        }
    }

    /// Fits at `config.lambda`, warm-starting from a previous fit of the same
    /// estimator when given.
    pub fn fit(&self, data: &SurvivalDataset, config: &FitConfig, warm: Option<&FitResult>) -> Result<FitResult> {
        match self {
            Self::Graph(model) => model.fit(data, config, warm.and_then(|f| f.expanded.as_ref())),
            Self::Penalized(penalty) => fit_penalized_cox(data, penalty, config, warm.map(|f| &f.beta)),
        }
    }

    /// Fits along descending `lambdas`, each warm-started from the previous.
    pub fn fit_path(&self, data: &SurvivalDataset, lambdas: &[f64], config: &FitConfig) -> Result<Vec<FitResult>> {
        let mut path: Vec<FitResult> = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let cfg = FitConfig {
                lambda,
                ..config.clone()
            };
            let fit = self.fit(data, &cfg, path.last())?;
            path.push(fit);
        }
        Ok(path)
    }
}

/// Event-stratified fold labels in `0..k`: events and censored observations
/// are shuffled separately and dealt round-robin, so per-fold event counts
/// differ by at most one.
pub fn make_folds(status: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    let events = status.iter().filter(|&&s| s).count();
    if k < 2 || k > status.len() {
        return Err(Error::InvalidParameter(format!(
            "fold count must lie in [2, n = {}], got {k}",
            status.len()
        )));
    }
    if events < k {
        return Err(Error::InvalidData(format!(
            "{events} events cannot cover {k} folds with at least one event each"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0; status.len()];
    let mut next = 0;
    for want in [true, false] {
        let mut members: Vec<usize> = (0..status.len()).filter(|&i| status[i] == want).collect();
        members.shuffle(&mut rng);
        for i in members {
            labels[i] = next % k;
            next += 1;
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    /// Fold label of every observation.
    pub folds: Vec<usize>,
    pub k: usize,
    pub grid: LambdaGrid,
    pub criterion: CvCriterion,
    /// Solver settings for every fit; `lambda` is overwritten.
    pub fit: FitConfig,
}

impl CvPlan {
    pub fn new(data: &SurvivalDataset, k: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            folds: make_folds(data.status(), k, seed)?,
            k,
            grid: LambdaGrid::default(),
            criterion: CvCriterion::default(),
            fit: FitConfig::default(),
        })
    }

    /// Explicit fold labels, e.g. leave-one-out.
    pub fn with_folds(folds: Vec<usize>, k: usize) -> Self {
        Self {
            folds,
            k,
            grid: LambdaGrid::default(),
            criterion: CvCriterion::default(),
            fit: FitConfig::default(),
        }
    }

    pub fn validate(&self, data: &SurvivalDataset) -> Result<()> {
        ensure_len("fold labels", data.n(), self.folds.len())?;
        self.grid.validate()?;
        if self.k < 2 {
            return Err(Error::InvalidParameter("need at least 2 folds".into()));
        }
        let mut events = vec![0usize; self.k];
        let mut sizes = vec![0usize; self.k];
        for (&f, &s) in self.folds.iter().zip(data.status()) {
            if f >= self.k {
                return Err(Error::InvalidParameter(format!("fold label {f} out of range for k = {}", self.k)));
            }
            sizes[f] += 1;
            events[f] += s as usize;
        }
        if let Some(f) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidData(format!("fold {f} is empty")));
        }
        if let Some(f) = events.iter().position(|&e| e == 0) {
            return Err(Error::InvalidData(format!("fold {f} has no events")));
        }
        Ok(())
    }

    fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.folds.len()).partition(|&i| self.folds[i] != fold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    pub criterion: Vec<f64>,
    pub best_lambda: f64,
}

impl CvResult {
    pub fn best_index(&self) -> usize {
        best_index(&self.criterion)
    }
}

/// First maximizer over the descending grid, so ties go to the larger `λ`.
fn best_index(criterion: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in criterion.iter().enumerate() {
        if c > criterion[best] || (!criterion[best].is_finite() && c.is_finite()) {
            best = i;
        }
    }
    best
}

/// Unnormalized log partial likelihood `ℓ(β) = −n f(β)`.
fn log_partial_likelihood(beta: &DVector<f64>, data: &SurvivalDataset) -> Result<f64> {
    Ok(-(data.n() as f64) * negative_partial_log_likelihood(beta, data)?)
}

/// Per-λ criterion values for one held-out fold (`None` for a c-index fold
/// without comparable pairs).
fn fold_curve(
    data: &SurvivalDataset,
    estimator: &Estimator,
    plan: &CvPlan,
    lambdas: &[f64],
    fold: usize,
) -> Result<Vec<Option<f64>>> {
    let (train_idx, test_idx) = plan.split(fold);
    let train = data.subset(&train_idx)?;
    let path = estimator.fit_path(&train, lambdas, &plan.fit)?;
    match plan.criterion {
        CvCriterion::CvPartialLikelihood => path
            .iter()
            .map(|fit| Ok(Some(log_partial_likelihood(&fit.beta, data)? - log_partial_likelihood(&fit.beta, &train)?)))
            .collect(),
        CvCriterion::CvCIndex => {
            let test = data.subset(&test_idx)?;
            path.iter()
                .map(|fit| {
                    let scores = test.linear_predictor(&fit.beta)?;
                    match c_index(scores.as_slice(), test.times(), test.status()) {
                        Ok(c) => Ok(Some(c)),
                        Err(Error::NoComparablePairs) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        }
    }
}

/// Tunes `λ` over the plan's grid anchored at the full-data `λ_max`.
///
/// Folds are fitted in parallel, each along the descending grid with warm
/// starts; per-fold curves are reduced in fold order so results are
/// bit-reproducible regardless of scheduling.
pub fn cross_validate(data: &SurvivalDataset, estimator: &Estimator, plan: &CvPlan) -> Result<CvResult> {
    plan.validate(data)?;
    let lambda_max = estimator.lambda_max(data)?;
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidData(format!("lambda_max is {lambda_max}; nothing to tune")));
    }
    let lambdas = plan.grid.values(lambda_max);
    let curves = (0..plan.k)
        .into_par_iter()
        .map(|f| fold_curve(data, estimator, plan, &lambdas, f))
        .collect::<Result<Vec<_>>>()?;

    let criterion: Vec<f64> = (0..lambdas.len())
        .map(|i| {
            let values = curves.iter().filter_map(|c| c[i]);
            match plan.criterion {
                CvCriterion::CvPartialLikelihood => values.sum(),
                CvCriterion::CvCIndex => {
                    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                    if count == 0 {
                        f64::NAN
                    } else {
                        sum / count as f64
                    }
                }
            }
        })
        .collect();
    if criterion.iter().all(|c| !c.is_finite()) {
        return Err(Error::NoComparablePairs);
    }
    let best = best_index(&criterion);
    Ok(CvResult {
        best_lambda: lambdas[best],
        lambda_grid: lambdas,
        criterion,
    })
}

/// Cross-validates `estimator`, then refits on all of `data` at the selected
/// λ from a cold start with `plan.fit`.
pub fn tune_and_fit(data: &SurvivalDataset, estimator: &Estimator, plan: &CvPlan) -> Result<(CvResult, FitResult)> {
    let cv = cross_validate(data, estimator, plan)?;
    let config = FitConfig {
        lambda: cv.best_lambda,
        ..plan.fit.clone()
    };
    let fit = estimator.fit(data, &config, None)?;
    Ok((cv, fit))
}

/// Adaptive-lasso weights `1 / max(|β̃_j|, floor)` from a pilot estimate.
pub fn adaptive_weights(pilot: &DVector<f64>, floor: f64) -> Vec<f64> {
    pilot.iter().map(|b| 1.0 / b.abs().max(floor)).collect()
}

/// Pilot-coefficient floor used by [`adaptive_lasso_penalty`].
pub const ADAPTIVE_FLOOR: f64 = 1e-6;

/// Adaptive lasso with weights from a cross-validated ridge pilot fit on the
/// same data and folds.
pub fn adaptive_lasso_penalty(data: &SurvivalDataset, plan: &CvPlan) -> Result<Penalty> {
    let ridge = Estimator::Penalized(Penalty::Ridge);
    let cv = cross_validate(data, &ridge, plan)?;
    let pilot = ridge.fit(data, &FitConfig { lambda: cv.best_lambda, ..plan.fit.clone() }, None)?;
    Ok(Penalty::AdaptiveLasso {
        weights: adaptive_weights(&pilot.beta, ADAPTIVE_FLOOR),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = LambdaGrid { count: 5, min_ratio: 1e-2 };
        let v = g.values(2.0);
        assert_eq!(v[0], 2.0);
        assert!((v[4] - 0.02).abs() < 1e-15);
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(LambdaGrid { count: 0, min_ratio: 0.5 }.validate().is_err());
        assert!(LambdaGrid { count: 3, min_ratio: 0.0 }.validate().is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let status: Vec<bool> = (0..23).map(|i| i % 3 != 0).collect();
        let folds = make_folds(&status, 5, 7).unwrap();
        let mut events = [0; 5];
        for (f, s) in folds.iter().zip(&status) {
            events[*f] += *s as usize;
        }
        let (lo, hi) = (events.iter().min().unwrap(), events.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert_eq!(folds, make_folds(&status, 5, 7).unwrap());
        assert!(make_folds(&[true, false, false], 2, 0).is_err());
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        assert_eq!(best_index(&[1.0, 2.0, 2.0, 0.5]), 1);
        assert_eq!(best_index(&[f64::NAN, 0.1, 0.1]), 1);
    }

    #[test]
    fn criterion_names_serialize() {
        assert_eq!(serde_json::to_string(&CvCriterion::CvCIndex).unwrap(), "\"cv_c_index\"");
        let g: LambdaGrid = serde_json::from_str("{\"count\": 4}").unwrap();
        assert_eq!(g.min_ratio, 1e-3);
    }
}
