//! Undirected predictor graphs with self-inclusive neighborhoods.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Graph `G = (V, E)` on `p` predictors.
///
/// `neighborhoods[k]` is `N_k = {k} ∪ {j : (k, j) ∈ E}` in ascending order, so
/// `d_k = |N_k| ≥ 1` and `Σ_k d_k = p + 2|E|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorGraph {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
    neighborhoods: Vec<Vec<usize>>,
}

impl PredictorGraph {
    /// Builds a graph from unordered pairs. Self-loops and duplicates are dropped.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= p || j >= p {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for p = {p}"
                )));
            }
            if i != j {
                set.insert((i.min(j), i.max(j)));
            }
        }
        let mut neighborhoods: Vec<Vec<usize>> = (0..p).map(|k| vec![k]).collect();
        for &(i, j) in &set {
            neighborhoods[i].push(j);
            neighborhoods[j].push(i);
        }
        for nb in &mut neighborhoods {
            nb.sort_unstable();
        }
        Ok(Self {
            p,
            edges: set,
            neighborhoods,
        })
    }

    pub fn edgeless(p: usize) -> Self {
        Self::new(p, std::iter::empty()).expect("no edges")
    }

    pub fn complete(p: usize) -> Self {
        Self::new(p, (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j)))).expect("in range")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighborhood(&self, k: usize) -> &[usize] {
        &self.neighborhoods[k]
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }

    /// `d_k = |N_k|`, counting `k` itself.
    pub fn degree(&self, k: usize) -> usize {
        self.neighborhoods[k].len()
    }

    /// Union of the edge sets of two graphs on the same nodes.
    pub fn merge(&self, other: &PredictorGraph) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch {
                what: "graph node count",
                expected: self.p,
                got: other.p,
            });
        }
        Self::new(self.p, self.edges().chain(other.edges()))
    }

    /// Parses the edge-list format: one whitespace-separated `i j` pair per
    /// line, 0-based, `#` starts a comment.
    pub fn parse_edge_list(p: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                location: format!("graph line {}", lineno + 1),
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(format!("expected `i j`, found `{line}`")));
            }
            let idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node index `{s}`: {e}")))
            };
            edges.push((idx(fields[0])?, idx(fields[1])?));
        }
        Self::new(p, edges)
    }

    pub fn read_edge_list(p: usize, path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(p, &std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# p = {}, edges = {}\n", self.p, self.edges.len());
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}").expect("string write");
        }
        out
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Random or deterministic graph families used by the simulation studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphTopologySpec {
    ErdosRenyi {
        p: usize,
        p0: f64,
        #[serde(default)]
        seed: u64,
    },
    Ring {
        p: usize,
    },
    Community {
        p: usize,
        community_sizes: Vec<usize>,
        p_in: f64,
        p_out: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl GraphTopologySpec {
    pub fn p(&self) -> usize {
        match self {
            Self::ErdosRenyi { p, .. } | Self::Ring { p } | Self::Community { p, .. } => *p,
        }
    }

    /// Same topology with its random seed replaced (no-op for rings).
    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut spec = self.clone();
        match &mut spec {
            Self::ErdosRenyi { seed, .. } | Self::Community { seed, .. } => *seed = new_seed,
            Self::Ring { .. } => {}
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.p() == 0 {
            return Err(Error::InvalidParameter("graph needs p > 0 nodes".into()));
        }
        let check_prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} is not a probability")))
            }
        };
        match self {
            Self::ErdosRenyi { p0, .. } => check_prob("p0", *p0),
            Self::Ring { .. } => Ok(()),
            Self::Community {
                p,
                community_sizes,
                p_in,
                p_out,
                ..
            } => {
                check_prob("p_in", *p_in)?;
                check_prob("p_out", *p_out)?;
                let total: usize = community_sizes.iter().sum();
                if total > *p {
                    return Err(Error::InvalidParameter(format!(
                        "community sizes sum to {total} > p = {p}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Community label per node; nodes outside every community get `None`.
    /// Communities occupy consecutive index ranges in the order given.
    pub fn community_labels(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.p()];
        if let Self::Community { community_sizes, .. } = self {
            let mut start = 0;
            for (c, &size) in community_sizes.iter().enumerate() {
                for label in &mut labels[start..start + size] {
                    *label = Some(c);
                }
                start += size;
            }
        }
        labels
    }
}

pub fn generate_graph(spec: &GraphTopologySpec) -> Result<PredictorGraph> {
    spec.validate()?;
    let p = spec.p();
    match spec {
        GraphTopologySpec::ErdosRenyi { p0, seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut edges = Vec::new();
            for i in 0..p {
                for j in i + 1..p {
                    if rng.random_bool(*p0) {
                        edges.push((i, j));
                    }
                }
            }
            PredictorGraph::new(p, edges)
        }
        GraphTopologySpec::Ring { .. } => PredictorGraph::new(p, (0..p).map(|i| (i, (i + 1) % p))),
        GraphTopologySpec::Community {
            p_in, p_out, seed, ..
        } => {
            let labels = spec.community_labels();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut edges = Vec::new();
            for i in 0..p {
                for j in i + 1..p {
                    let prob = match (labels[i], labels[j]) {
                        (Some(a), Some(b)) if a == b => *p_in,
                        _ => *p_out,
                    };
                    if rng.random_bool(prob) {
                        edges.push((i, j));
                    }
                }
            }
            PredictorGraph::new(p, edges)
        }
    }
}

/// Partial correlations and their two-sided t-test p-values, estimated from
/// the ridge-stabilized inverse of the sample correlation matrix.
#[derive(Debug, Clone)]
pub struct PartialCorrelations {
    pub correlation: DMatrix<f64>,
    pub p_values: DMatrix<f64>,
    pub degrees_of_freedom: usize,
}

pub fn partial_correlations(covariates: &DMatrix<f64>) -> Result<PartialCorrelations> {
    let (n, p) = covariates.shape();
    if n <= p + 2 {
        return Err(Error::InvalidData(format!(
            "need n > p + 2 observations for partial correlations (n = {n}, p = {p})"
        )));
    }
    if covariates.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariates"));
    }

    // standardize columns so the estimate is invariant to column scaling
    let mut z = covariates.clone();
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
        if !(sd > 0.0) || sd < 1e-12 * mean.abs().max(1.0) {
            return Err(Error::InvalidData(format!("column {j} is constant")));
        }
        col /= sd;
    }
    let mut corr = z.tr_mul(&z) / (n - 1) as f64;
    let ridge = 1e-4 * corr.trace() / p as f64;
    for k in 0..p {
        corr[(k, k)] += ridge;
    }
    let precision = corr
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("sample correlation after ridge".into()))?
        .inverse();

    let df = n - p;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
    let mut partial = DMatrix::identity(p, p);
    let mut p_values = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let r = (-precision[(i, j)] / (precision[(i, i)] * precision[(j, j)]).sqrt())
                .clamp(-1.0, 1.0);
            let pv = if r.abs() >= 1.0 {
                0.0
            } else {
                let t = r * (df as f64 / (1.0 - r * r)).sqrt();
                2.0 * t_dist.sf(t.abs())
            };
            partial[(i, j)] = r;
            partial[(j, i)] = r;
            p_values[(i, j)] = pv;
            p_values[(j, i)] = pv;
        }
    }
    Ok(PartialCorrelations {
        correlation: partial,
        p_values,
        degrees_of_freedom: df,
    })
}

/// Connects `(i, j)` when the partial-correlation test rejects at level `alpha`.
pub fn graph_from_data(covariates: &DMatrix<f64>, alpha: f64) -> Result<PredictorGraph> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance level must lie in (0, 1), got {alpha}"
        )));
    }
    let pc = partial_correlations(covariates)?;
    let p = covariates.ncols();
    let edges = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .filter(|&(i, j)| pc.p_values[(i, j)] < alpha);
    PredictorGraph::new(p, edges)
}
