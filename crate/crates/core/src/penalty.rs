//! The latent-group graph norm, predictor duplication and proximal maps.
//!
//! For a predictor graph with neighborhoods `N_k` and node weights `τ_k > 0`,
//!
//! ```text
//! ‖β‖_{G,τ} = min { Σ_k τ_k ‖V^(k)‖₂ : Σ_k V^(k) = β, supp V^(k) ⊆ N_k }.
//! ```
//!
//! Stacking the free entries of every `V^(k)` gives a vector of length
//! `D = Σ_k d_k`. On that expanded space the norm becomes an ordinary,
//! non-overlapping group lasso and `β` is recovered by summing the copies of
//! each coordinate ([`GroupLayout::collapse`]).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::graph::PredictorGraph;

/// Strictly positive, finite per-node weights `τ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NodeWeights(Vec<f64>);

impl NodeWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "node weights must be positive and finite, found {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn uniform(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    pub fn from_rule(rule: TauRule, graph: &PredictorGraph) -> Self {
        let values = (0..graph.p())
            .map(|k| match rule {
                TauRule::Unit => 1.0,
                TauRule::SqrtDegree => (graph.degree(k) as f64).sqrt(),
            })
            .collect();
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Weights file: one `k tau_k` pair per line (0-based `k`), `#` comments.
    /// Nodes not listed keep the value from `defaults`.
    pub fn parse(text: &str, defaults: &NodeWeights) -> Result<Self> {
        let mut values = defaults.0.clone();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                location: format!("weights line {}", lineno + 1),
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [k, tau] = fields[..] else {
                return Err(parse_err(format!("expected `k tau`, found `{line}`")));
            };
            let k: usize = k.parse().map_err(|e| parse_err(format!("bad node `{k}`: {e}")))?;
            let tau: f64 = tau.parse().map_err(|e| parse_err(format!("bad weight `{tau}`: {e}")))?;
            if k >= values.len() {
                return Err(parse_err(format!("node {k} out of range")));
            }
            values[k] = tau;
        }
        Self::new(values)
    }

    pub fn read(path: impl AsRef<Path>, defaults: &NodeWeights) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, defaults)
    }
}

impl TryFrom<Vec<f64>> for NodeWeights {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<NodeWeights> for Vec<f64> {
    fn from(w: NodeWeights) -> Self {
        w.0
    }
}

/// Default weight convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauRule {
    Unit,
    #[default]
    SqrtDegree,
}

/// One block of the expanded coordinates: the copy of `N_node` owned by `node`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub node: usize,
    pub offset: usize,
    pub members: Vec<usize>,
}

impl Group {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.members.len()
    }
}

/// Coordinate map of the duplicated design: expanded coordinate `c` is the
/// copy of original feature `feature[c]` held by group `owner[c]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    p: usize,
    groups: Vec<Group>,
    feature: Vec<usize>,
    owner: Vec<usize>,
    // number of groups holding each feature
    copies: Vec<usize>,
}

impl GroupLayout {
    /// Groups ordered `k = 0..p`, members in ascending feature order.
    pub fn from_graph(graph: &PredictorGraph) -> Self {
        let order: Vec<usize> = (0..graph.p()).collect();
        Self::with_group_order(graph, &order).expect("identity order")
    }

    /// Same expansion with groups laid out in the given node order.
    pub fn with_group_order(graph: &PredictorGraph, order: &[usize]) -> Result<Self> {
        let p = graph.p();
        let mut seen = vec![false; p];
        if order.len() != p || order.iter().any(|&k| k >= p || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidParameter("group order must be a permutation of 0..p".into()));
        }
        let mut groups = Vec::with_capacity(p);
        let mut feature = Vec::new();
        let mut owner = Vec::new();
        let mut copies = vec![0; p];
        for &k in order {
            let members = graph.neighborhood(k).to_vec();
            groups.push(Group {
                node: k,
                offset: feature.len(),
                members: members.clone(),
            });
            for &j in &members {
                feature.push(j);
                owner.push(k);
                copies[j] += 1;
            }
        }
        Ok(Self {
            p,
            groups,
            feature,
            owner,
            copies,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Expanded dimension `D = Σ_k d_k`.
    pub fn dim(&self) -> usize {
        self.feature.len()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// `(group node, original feature)` for expanded coordinate `c`.
    pub fn coordinate(&self, c: usize) -> (usize, usize) {
        (self.owner[c], self.feature[c])
    }

    /// `β_j = Σ_{c : feature(c) = j} v_c`.
    pub fn collapse(&self, expanded: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_len("expanded vector", self.dim(), expanded.len())?;
        let mut beta = DVector::zeros(self.p);
        for (&j, &v) in self.feature.iter().zip(expanded.iter()) {
            beta[j] += v;
        }
        Ok(beta)
    }

    /// Adjoint of [`collapse`](Self::collapse): copies `g_j` to every slot of feature `j`.
    pub fn gather(&self, original: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_len("original vector", self.p, original.len())?;
        Ok(DVector::from_iterator(
            self.dim(),
            self.feature.iter().map(|&j| original[j]),
        ))
    }

    /// The `p × D` 0/1 matrix of [`collapse`](Self::collapse).
    pub fn collapse_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.p, self.dim());
        for (c, &j) in self.feature.iter().enumerate() {
            m[(j, c)] = 1.0;
        }
        m
    }

    pub fn decompose(&self, expanded: &DVector<f64>) -> Result<LatentDecomposition> {
        ensure_len("expanded vector", self.dim(), expanded.len())?;
        let mut vectors = vec![DVector::zeros(self.p); self.p];
        for g in &self.groups {
            for (c, &j) in g.range().zip(&g.members) {
                vectors[g.node][j] = expanded[c];
            }
        }
        Ok(LatentDecomposition { vectors })
    }

    /// Inverse of [`decompose`](Self::decompose); entries outside `N_k` are ignored.
    pub fn expand(&self, decomposition: &LatentDecomposition) -> Result<DVector<f64>> {
        ensure_len("decomposition size", self.p, decomposition.vectors.len())?;
        let mut v = DVector::zeros(self.dim());
        for g in &self.groups {
            for (c, &j) in g.range().zip(&g.members) {
                v[c] = decomposition.vectors[g.node][j];
            }
        }
        Ok(v)
    }

    /// `Σ_k τ_k ‖v_k‖₂` over the expanded blocks.
    pub fn weighted_group_norm(&self, expanded: &DVector<f64>, weights: &NodeWeights) -> f64 {
        self.groups
            .iter()
            .map(|g| weights.0[g.node] * expanded.rows(g.offset, g.members.len()).norm())
            .sum()
    }

    /// Block soft-threshold of every group with threshold `scale · τ_k`.
    pub fn prox(&self, v: &DVector<f64>, weights: &NodeWeights, scale: f64) -> DVector<f64> {
        let mut out = v.clone();
        for g in &self.groups {
            let mut block = out.rows_mut(g.offset, g.members.len());
            let norm = block.norm();
            let threshold = scale * weights.0[g.node];
            if norm <= threshold {
                block.fill(0.0);
            } else {
                block *= 1.0 - threshold / norm;
            }
        }
        out
    }

    pub(crate) fn check_weights(&self, weights: &NodeWeights) -> Result<()> {
        ensure_len("node weights", self.p, weights.len())
    }
}

/// `β = Σ_k V^(k)` with `supp V^(k) ⊆ N_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDecomposition {
    pub vectors: Vec<DVector<f64>>,
}

impl LatentDecomposition {
    pub fn reconstruct(&self) -> DVector<f64> {
        let p = self.vectors.first().map_or(0, |v| v.len());
        self.vectors.iter().fold(DVector::zeros(p), |acc, v| acc + v)
    }

    /// Whether every `V^(k)` vanishes outside `N_k`.
    pub fn respects(&self, graph: &PredictorGraph) -> bool {
        self.vectors.len() == graph.p()
            && self.vectors.iter().enumerate().all(|(k, v)| {
                v.iter()
                    .enumerate()
                    .all(|(j, &x)| x == 0.0 || graph.neighborhood(k).binary_search(&j).is_ok())
            })
    }

    pub fn cost(&self, weights: &NodeWeights) -> f64 {
        self.vectors
            .iter()
            .zip(weights.as_slice())
            .map(|(v, t)| t * v.norm())
            .sum()
    }
}

/// Expanded design `X̃ = X C'` together with its coordinate map.
#[derive(Debug, Clone)]
pub struct DuplicatedDesign {
    pub layout: GroupLayout,
    pub matrix: DMatrix<f64>,
}

impl DuplicatedDesign {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }
}

pub fn duplicate_design(x: &DMatrix<f64>, graph: &PredictorGraph) -> Result<DuplicatedDesign> {
    ensure_len("graph node count", x.ncols(), graph.p())?;
    let layout = GroupLayout::from_graph(graph);
    let cols: Vec<usize> = (0..layout.dim()).map(|c| layout.coordinate(c).1).collect();
    let matrix = x.select_columns(&cols);
    Ok(DuplicatedDesign { layout, matrix })
}

pub fn collapse(expanded: &DVector<f64>, design: &DuplicatedDesign) -> Result<DVector<f64>> {
    design.layout.collapse(expanded)
}

/// `v · max(0, 1 − threshold/‖v‖₂)`.
pub fn group_soft_threshold(v: &DVector<f64>, threshold: f64) -> DVector<f64> {
    let norm = v.norm();
    if norm <= threshold {
        DVector::zeros(v.len())
    } else {
        v * (1.0 - threshold / norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

/// Value of the graph norm with a certificate.
#[derive(Debug, Clone)]
pub struct GraphNormSolution {
    /// Cost of `decomposition`, an upper bound on the norm.
    pub value: f64,
    /// A dual-feasible lower bound.
    pub lower_bound: f64,
    pub decomposition: LatentDecomposition,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖β‖_{G,τ}` to absolute accuracy `tol · max(1, ‖β‖_{G,τ})`.
pub fn graph_norm(beta: &DVector<f64>, graph: &PredictorGraph, weights: &NodeWeights, tol: f64) -> Result<f64> {
    let opts = NormOptions {
        tol,
        ..NormOptions::default()
    };
    Ok(graph_norm_solution(beta, graph, weights, opts)?.value)
}

/// Solves the decomposition problem by ADMM on the expanded coordinates.
///
/// Splitting `min Σ τ_k‖x_k‖ + 1{C z = β}` with `x = z`: the `x` step is a
/// block soft-threshold, and the `z` step is the projection onto
/// `{C z = β}`, which is cheap because `C C'` is diagonal (`d_j` copies of
/// feature `j`). Every `z` iterate is feasible, so its cost is an upper bound;
/// the subgradient from the `x` step, averaged over copies and scaled into
/// `{α : ‖α_{N_k}‖ ≤ τ_k ∀k}`, gives the lower bound `α'β`.
pub fn graph_norm_solution(
    beta: &DVector<f64>,
    graph: &PredictorGraph,
    weights: &NodeWeights,
    opts: NormOptions,
) -> Result<GraphNormSolution> {
    ensure_len("coefficient vector", graph.p(), beta.len())?;
    ensure_len("node weights", graph.p(), weights.len())?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("coefficients"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let layout = GroupLayout::from_graph(graph);
    let p = graph.p();
    let dim = layout.dim();

    let project = |w: &DVector<f64>| -> DVector<f64> {
        let residual = layout.collapse(w).expect("dim") - beta;
        let mut z = w.clone();
        for c in 0..dim {
            let j = layout.feature[c];
            z[c] -= residual[j] / layout.copies[j] as f64;
        }
        z
    };

    // start from an even split of each coordinate across its copies
    let mut z = project(&DVector::zeros(dim));
    let mut best = z.clone();
    let mut upper = layout.weighted_group_norm(&z, weights);
    if upper == 0.0 {
        return Ok(GraphNormSolution {
            value: 0.0,
            lower_bound: 0.0,
            decomposition: layout.decompose(&z)?,
            iterations: 0,
            converged: true,
        });
    }
    let mut lower = 0.0_f64;
    let mean_tau = weights.as_slice().iter().sum::<f64>() / p as f64;
    let mut rho = mean_tau * (p as f64).sqrt() / beta.norm();
    let mut u = DVector::<f64>::zeros(dim);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let target = &z - &u;
        let x = layout.prox(&target, weights, 1.0 / rho);
        let z_old = z;
        z = project(&(&x + &u));
        u += &x - &z;

        let cost = layout.weighted_group_norm(&z, weights);
        if cost < upper {
            upper = cost;
            best.copy_from(&z);
        }

        if iterations % 10 == 1 || iterations == opts.max_iter {
            // subgradient of Σ τ_k‖x_k‖ at x from the x-step optimality condition
            let s = (&target - &x) * rho;
            let mut alpha = DVector::<f64>::zeros(p);
            for (c, &j) in layout.feature.iter().enumerate() {
                alpha[j] += s[c];
            }
            for j in 0..p {
                alpha[j] /= layout.copies[j] as f64;
            }
            let mut worst: f64 = 0.0;
            for g in &layout.groups {
                let norm = g.members.iter().map(|&j| alpha[j] * alpha[j]).sum::<f64>().sqrt();
                worst = worst.max(norm / weights.0[g.node]);
            }
            if worst > 0.0 {
                lower = lower.max(alpha.dot(beta) / worst.max(1.0));
            }
            if upper - lower <= opts.tol * upper.max(1.0) {
                converged = true;
                break;
            }

            // residual balancing
            let primal = (&x - &z).norm();
            let dual = rho * (&z - &z_old).norm();
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    Ok(GraphNormSolution {
        value: upper,
        lower_bound: lower,
        decomposition: layout.decompose(&best)?,
        iterations,
        converged,
    })
}

/// Penalties other than the graph norm, each scaled by the level `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    /// `λ‖β‖₁`
    Lasso,
    /// `(λ/2)‖β‖₂²`, handled as part of the smooth objective.
    Ridge,
    /// `λα‖β‖₁ + (λ(1−α)/2)‖β‖₂²` with mixing `α = l1_ratio ∈ (0, 1]`.
    ElasticNet { l1_ratio: f64 },
    /// `Σ_j SCAD_{λ,a}(|β_j|)`, `a > 2`.
    Scad { a: f64 },
    /// `λ Σ_j w_j |β_j|`.
    AdaptiveLasso { weights: Vec<f64> },
    /// `λ Σ_g w_g ‖β_g‖₂` over disjoint groups.
    GroupLasso { groups: Vec<Vec<usize>>, weights: Vec<f64> },
}

pub const DEFAULT_SCAD_A: f64 = 3.7;

impl Penalty {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lasso => "lasso",
            Self::Ridge => "ridge",
            Self::ElasticNet { .. } => "elastic_net",
            Self::Scad { .. } => "scad",
            Self::AdaptiveLasso { .. } => "adaptive_lasso",
            Self::GroupLasso { .. } => "group_lasso",
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Self::Lasso | Self::Ridge => Ok(()),
            Self::ElasticNet { l1_ratio } => {
                if *l1_ratio > 0.0 && *l1_ratio <= 1.0 {
                    Ok(())
                } else {
                    bad(format!("elastic-net l1_ratio must lie in (0, 1], got {l1_ratio}"))
                }
            }
            Self::Scad { a } => {
                if *a > 2.0 && a.is_finite() {
                    Ok(())
                } else {
                    bad(format!("SCAD requires a > 2, got {a}"))
                }
            }
            Self::AdaptiveLasso { weights } => {
                ensure_len("adaptive-lasso weights", p, weights.len())?;
                if weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
                    Ok(())
                } else {
                    bad("adaptive-lasso weights must be finite and non-negative".into())
                }
            }
            Self::GroupLasso { groups, weights } => {
                ensure_len("group weights", groups.len(), weights.len())?;
                let mut seen = vec![false; p];
                for &j in groups.iter().flatten() {
                    if j >= p || std::mem::replace(&mut seen[j], true) {
                        return bad(format!("group lasso groups must be disjoint indices < {p}"));
                    }
                }
                if weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
                    Ok(())
                } else {
                    bad("group weights must be finite and non-negative".into())
                }
            }
        }
    }

    /// Penalty value at level `lambda`.
    pub fn value(&self, lambda: f64, beta: &DVector<f64>) -> f64 {
        match self {
            Self::Lasso => lambda * beta.lp_norm(1),
            Self::Ridge => 0.5 * lambda * beta.norm_squared(),
            Self::ElasticNet { l1_ratio } => {
                lambda * l1_ratio * beta.lp_norm(1) + 0.5 * lambda * (1.0 - l1_ratio) * beta.norm_squared()
            }
            Self::Scad { a } => beta.iter().map(|b| scad_value(b.abs(), lambda, *a)).sum(),
            Self::AdaptiveLasso { weights } => {
                lambda * beta.iter().zip(weights).map(|(b, w)| w * b.abs()).sum::<f64>()
            }
            Self::GroupLasso { groups, weights } => {
                lambda
                    * groups
                        .iter()
                        .zip(weights)
                        .map(|(g, w)| w * g.iter().map(|&j| beta[j] * beta[j]).sum::<f64>().sqrt())
                        .sum::<f64>()
            }
        }
    }
}

/// SCAD penalty: `λθ` on `[0, λ]`, quadratic blend on `(λ, aλ]`, constant
/// `(a+1)λ²/2` beyond.
pub fn scad_value(theta: f64, lambda: f64, a: f64) -> f64 {
    if theta <= lambda {
        lambda * theta
    } else if theta <= a * lambda {
        (2.0 * a * lambda * theta - theta * theta - lambda * lambda) / (2.0 * (a - 1.0))
    } else {
        (a + 1.0) * lambda * lambda / 2.0
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Exact `argmin_x ½(x − z)² + step·SCAD_{λ,a}(|x|)`, valid for any step
/// (including the nonconvex regime `step ≥ a − 1`) by comparing the
/// minimizers of the three pieces.
fn scad_prox_scalar(z: f64, lambda: f64, a: f64, step: f64) -> f64 {
    let az = z.abs();
    let objective = |theta: f64| 0.5 * (theta - az).powi(2) + step * scad_value(theta, lambda, a);
    let mut candidates = vec![(az - step * lambda).clamp(0.0, lambda), lambda, a * lambda, az.max(a * lambda)];
    let denom = a - 1.0 - step;
    if denom > 0.0 {
        let theta = ((a - 1.0) * az - step * a * lambda) / denom;
        candidates.push(theta.clamp(lambda, a * lambda));
    }
    let best = candidates
        .into_iter()
        .map(|t| (objective(t), t))
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
        .expect("non-empty")
        .1;
    z.signum() * best
}

/// Proximal map `argmin_x ½‖x − v‖² + step · g_λ(x)` of a [`Penalty`] at level `lambda`.
pub fn penalty_prox(penalty: &Penalty, lambda: f64, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("prox step must be positive, got {step}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("penalty level must be non-negative, got {lambda}")));
    }
    penalty.validate(v.len())?;
    let t = step * lambda;
    Ok(match penalty {
        Penalty::Lasso => v.map(|x| soft_threshold(x, t)),
        Penalty::Ridge => v / (1.0 + t),
        Penalty::ElasticNet { l1_ratio } => {
            let shrink = 1.0 + t * (1.0 - l1_ratio);
            v.map(|x| soft_threshold(x, t * l1_ratio) / shrink)
        }
        Penalty::Scad { a } => v.map(|x| scad_prox_scalar(x, lambda, *a, step)),
        Penalty::AdaptiveLasso { weights } => {
            DVector::from_iterator(v.len(), v.iter().zip(weights).map(|(x, w)| soft_threshold(*x, t * w)))
        }
        Penalty::GroupLasso { groups, weights } => {
            let mut out = v.clone();
            for (g, w) in groups.iter().zip(weights) {
                let norm = g.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
                let factor = if norm <= t * w { 0.0 } else { 1.0 - t * w / norm };
                for &j in g {
                    out[j] *= factor;
                }
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn edgeless_duplication_is_identity() {
        let x = DMatrix::from_fn(4, 3, |i, j| (i + 2 * j) as f64);
        let d = duplicate_design(&x, &PredictorGraph::edgeless(3)).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.matrix, x);
        assert!(d.layout.groups().iter().all(|g| g.members.len() == 1));
        let v = dv(&[1.0, -2.0, 3.0]);
        assert_eq!(collapse(&v, &d).unwrap(), v);
    }

    #[test]
    fn single_edge_duplication() {
        let x = DMatrix::from_fn(3, 2, |i, j| (10 * j + i) as f64);
        let g = PredictorGraph::new(2, [(0, 1)]).unwrap();
        let d = duplicate_design(&x, &g).unwrap();
        assert_eq!(d.dim(), 4);
        for (c, j) in [0, 1, 0, 1].into_iter().enumerate() {
            assert_eq!(d.matrix.column(c), x.column(j));
        }
        assert_eq!(d.layout.coordinate(2), (1, 0));
        let beta = collapse(&dv(&[1.0, 2.0, 3.0, 4.0]), &d).unwrap();
        assert_eq!(beta, dv(&[4.0, 6.0]));
        assert_eq!(collapse(&DVector::zeros(4), &d).unwrap(), DVector::zeros(2));
        assert!(collapse(&DVector::zeros(3), &d).is_err());
    }

    #[test]
    fn duplicate_design_checks_dimensions() {
        let x = DMatrix::zeros(3, 2);
        assert!(duplicate_design(&x, &PredictorGraph::edgeless(3)).is_err());
    }

    #[test]
    fn group_order_must_be_permutation() {
        let g = PredictorGraph::complete(3);
        assert!(GroupLayout::with_group_order(&g, &[0, 0, 1]).is_err());
        assert!(GroupLayout::with_group_order(&g, &[0, 1]).is_err());
        let l = GroupLayout::with_group_order(&g, &[2, 0, 1]).unwrap();
        assert_eq!(l.groups()[0].node, 2);
    }

    #[test]
    fn soft_threshold_cases() {
        let v = dv(&[1.0, 2.0, 2.0]);
        let out = group_soft_threshold(&v, 1.0);
        assert!((out - &v * (2.0 / 3.0)).norm() < 1e-15);
        assert_eq!(group_soft_threshold(&v, 0.0), v);
        assert_eq!(group_soft_threshold(&v, 3.5), DVector::zeros(3));
        assert_eq!(group_soft_threshold(&v, 3.0), DVector::zeros(3));
    }

    #[test]
    fn norm_zero_and_edgeless() {
        let g = PredictorGraph::edgeless(2);
        let w = NodeWeights::uniform(2, 1.0).unwrap();
        assert_eq!(graph_norm(&DVector::zeros(2), &g, &w, 1e-8).unwrap(), 0.0);
        assert_eq!(graph_norm(&dv(&[1.0, -2.0]), &g, &w, 1e-8).unwrap(), 3.0);
    }

    #[test]
    fn norm_complete_graph_uses_cheapest_group() {
        let g = PredictorGraph::complete(2);
        let w = NodeWeights::new(vec![1.0, 2.0]).unwrap();
        let sol = graph_norm_solution(&dv(&[3.0, 4.0]), &g, &w, NormOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.value - 5.0).abs() < 1e-7, "{}", sol.value);
        assert!(sol.lower_bound <= 5.0 + 1e-12);
        assert!((sol.decomposition.reconstruct() - dv(&[3.0, 4.0])).norm() < 1e-8);
        assert!(sol.decomposition.respects(&g));
    }

    #[test]
    fn norm_rejects_bad_input() {
        let g = PredictorGraph::edgeless(2);
        let w = NodeWeights::uniform(2, 1.0).unwrap();
        assert!(graph_norm(&dv(&[f64::NAN, 1.0]), &g, &w, 1e-8).is_err());
        assert!(graph_norm(&dv(&[1.0]), &g, &w, 1e-8).is_err());
        assert!(graph_norm(&dv(&[1.0, 1.0]), &g, &w, 0.0).is_err());
        assert!(NodeWeights::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn weights_file_and_rules() {
        let g = PredictorGraph::new(3, [(0, 1)]).unwrap();
        let defaults = NodeWeights::from_rule(TauRule::SqrtDegree, &g);
        assert_eq!(defaults.as_slice(), &[2f64.sqrt(), 2f64.sqrt(), 1.0]);
        let w = NodeWeights::parse("# tau\n2 0.5\n0 3\n", &defaults).unwrap();
        assert_eq!(w.as_slice(), &[3.0, 2f64.sqrt(), 0.5]);
        assert!(NodeWeights::parse("5 1.0\n", &defaults).is_err());
        assert!(NodeWeights::parse("1 -1.0\n", &defaults).is_err());
        assert!(NodeWeights::parse("1\n", &defaults).is_err());
    }

    #[test]
    fn lasso_prox_example() {
        let out = penalty_prox(&Penalty::Lasso, 1.0, &dv(&[2.0, -0.5]), 1.0).unwrap();
        assert_eq!(out, dv(&[1.0, 0.0]));
    }

    #[test]
    fn scad_prox_regions() {
        let scad = Penalty::Scad { a: DEFAULT_SCAD_A };
        let lambda = 1.0;
        // beyond aλ: untouched
        let out = penalty_prox(&scad, lambda, &dv(&[4.0, -5.0]), 1.0).unwrap();
        assert_eq!(out, dv(&[4.0, -5.0]));
        // soft-threshold region |z| ≤ 2λ at unit step
        let out = penalty_prox(&scad, lambda, &dv(&[1.5, -0.5]), 1.0).unwrap();
        assert!((out - dv(&[0.5, 0.0])).norm() < 1e-15);
        // linear interpolation region
        let z = 3.0;
        let expected = ((DEFAULT_SCAD_A - 1.0) * z - DEFAULT_SCAD_A * lambda) / (DEFAULT_SCAD_A - 2.0);
        let out = penalty_prox(&scad, lambda, &dv(&[z]), 1.0).unwrap();
        assert!((out[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn prox_rejects_bad_parameters() {
        let v = dv(&[1.0]);
        assert!(penalty_prox(&Penalty::Lasso, 1.0, &v, 0.0).is_err());
        assert!(penalty_prox(&Penalty::Lasso, -1.0, &v, 1.0).is_err());
        assert!(penalty_prox(&Penalty::Scad { a: 1.5 }, 1.0, &v, 1.0).is_err());
        assert!(penalty_prox(&Penalty::ElasticNet { l1_ratio: 0.0 }, 1.0, &v, 1.0).is_err());
        assert!(penalty_prox(&Penalty::AdaptiveLasso { weights: vec![1.0, 2.0] }, 1.0, &v, 1.0).is_err());
        let overlapping = Penalty::GroupLasso {
            groups: vec![vec![0], vec![0]],
            weights: vec![1.0, 1.0],
        };
        assert!(penalty_prox(&overlapping, 1.0, &v, 1.0).is_err());
    }

    #[test]
    fn group_lasso_prox_matches_block_threshold() {
        let pen = Penalty::GroupLasso {
            groups: vec![vec![0, 2], vec![1]],
            weights: vec![1.0, 2.0],
        };
        let v = dv(&[3.0, 1.0, 4.0]);
        let out = penalty_prox(&pen, 1.0, &v, 1.0).unwrap();
        assert!((out - dv(&[3.0 * 0.8, 0.0, 4.0 * 0.8])).norm() < 1e-15);
    }
}
