//! Synthetic studies: structured precision matrices, true coefficients,
//! Gaussian predictors and censored Cox survival times.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::graph::{generate_graph, GraphTopologySpec, PredictorGraph};
use crate::model_selection::{CvCriterion, LambdaGrid};
use crate::penalty::TauRule;
use crate::survival::SurvivalDataset;

/// Off-diagonal value placed on every edge of the drawn graph.
pub const EDGE_PRECISION: f64 = 0.5;
/// Eigenvalue floor of the PD repair, relative to the largest eigenvalue.
pub const PD_FLOOR_RATIO: f64 = 1e-3;

/// Symmetric positive-definite precision matrix `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    matrix: DMatrix<f64>,
    topology: GraphTopologySpec,
    repaired: bool,
}

impl PrecisionMatrix {
    pub fn new(matrix: DMatrix<f64>, topology: GraphTopologySpec) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidParameter("precision matrix must be square".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::InvalidParameter(format!("precision matrix is not symmetric ({asym:e})")));
        }
        if matrix.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("precision matrix".into()));
        }
        Ok(Self {
            matrix,
            topology,
            repaired: false,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn topology(&self) -> &GraphTopologySpec {
        &self.topology
    }

    /// Whether the eigenvalue repair changed the raw matrix.
    pub fn repaired(&self) -> bool {
        self.repaired
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Ω⁻¹`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.matrix.clone().cholesky().expect("validated PD").inverse()
    }
}

/// Symmetrizes and floors eigenvalues at `floor_ratio · λ_max`. Returns the
/// input (symmetrized) untouched when it already satisfies the floor.
pub fn nearest_positive_definite(matrix: &DMatrix<f64>, floor_ratio: f64) -> (DMatrix<f64>, bool) {
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let floor = floor_ratio * max.abs().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.min() >= floor {
        return (sym, false);
    }
    let clamped = eig.eigenvalues.map(|v| v.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    ((&rebuilt + rebuilt.transpose()) * 0.5, true)
}

fn adjacency_precision(graph: &PredictorGraph) -> DMatrix<f64> {
    let mut m = DMatrix::identity(graph.p(), graph.p());
    for (i, j) in graph.edges() {
        m[(i, j)] = EDGE_PRECISION;
        m[(j, i)] = EDGE_PRECISION;
    }
    m
}

/// Shift `δ` with `cond(B + δI) = target`, found by bisection on the
/// eigenvalues of the symmetric matrix `B`.
pub fn condition_shift(b: &DMatrix<f64>, target: f64) -> Result<f64> {
    let eig = b.clone().symmetric_eigenvalues();
    let (lo_eig, hi_eig) = (eig.min(), eig.max());
    let spread = hi_eig - lo_eig;
    if !(target >= 1.0) {
        return Err(Error::InvalidParameter(format!("condition number target {target} < 1")));
    }
    if spread <= 1e-14 * hi_eig.abs().max(1.0) {
        // every shift gives condition number 1
        return if target - 1.0 <= 1e-12 {
            Ok(1.0 - lo_eig)
        } else {
            Err(Error::Numerical(format!(
                "no shift reaches condition number {target}: matrix has a single eigenvalue"
            )))
        };
    }
    if target - 1.0 <= 1e-12 {
        return Err(Error::Numerical("condition number 1 needs equal eigenvalues".into()));
    }
    let cond = |d: f64| (hi_eig + d) / (lo_eig + d);
    // cond decreases from ∞ to 1 on (−λ_min, ∞)
    let mut lo = -lo_eig;
    let mut width = spread;
    while cond(-lo_eig + width) > target {
        width *= 2.0;
        if !width.is_finite() {
            return Err(Error::Numerical("condition-number bisection did not bracket".into()));
        }
    }
    let mut hi = -lo_eig + width;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cond(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    if ((cond(delta) - target) / target).abs() > 1e-6 {
        return Err(Error::Numerical(format!(
            "condition-number bisection stalled at {}",
            cond(delta)
        )));
    }
    Ok(delta)
}

/// Builds `Ω` for a topology together with the graph used for penalization.
///
/// * Erdős–Rényi / community: unit diagonal, [`EDGE_PRECISION`] on drawn
///   edges, then [`nearest_positive_definite`].
/// * Ring: `Ω = B + δI` with `B` the path band `B_ij = 0.5` for `|i − j| = 1`
///   (no wraparound entry) and `δ` giving condition number `p`. The returned
///   graph is the ring with its wraparound edge.
pub fn build_precision(spec: &GraphTopologySpec) -> Result<(PrecisionMatrix, PredictorGraph)> {
    let graph = generate_graph(spec)?;
    let p = spec.p();
    let (matrix, repaired) = match spec {
        GraphTopologySpec::Ring { .. } => {
            let b = DMatrix::from_fn(p, p, |i, j| if i.abs_diff(j) == 1 { EDGE_PRECISION } else { 0.0 });
            let delta = condition_shift(&b, p as f64)?;
            (b + DMatrix::identity(p, p) * delta, false)
        }
        _ => nearest_positive_definite(&adjacency_precision(&graph), PD_FLOOR_RATIO),
    };
    let mut precision = PrecisionMatrix::new(matrix, spec.clone())?;
    precision.repaired = repaired;
    Ok((precision, graph))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientRule {
    /// `c_k = value` on the `count` highest-degree nodes (lowest index wins
    /// ties), zero elsewhere; `β0 = Ω c`.
    TopDegree { count: usize, value: f64 },
    /// `β0 = Ω 1`.
    AllOnes,
}

impl CoefficientRule {
    pub fn default_for(topology: &GraphTopologySpec) -> Self {
        match topology {
            GraphTopologySpec::Ring { .. } => Self::AllOnes,
            _ => Self::TopDegree { count: 4, value: 10.0 },
        }
    }
}

pub fn true_coefficients(omega: &PrecisionMatrix, graph: &PredictorGraph, rule: CoefficientRule) -> Result<DVector<f64>> {
    let p = omega.p();
    ensure_len("graph node count", p, graph.p())?;
    let c = match rule {
        CoefficientRule::AllOnes => DVector::from_element(p, 1.0),
        CoefficientRule::TopDegree { count, value } => {
            let mut nodes: Vec<usize> = (0..p).collect();
            nodes.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));
            let mut c = DVector::zeros(p);
            for &k in nodes.iter().take(count) {
                c[k] = value;
            }
            c
        }
    };
    Ok(omega.matrix() * c)
}

/// `n` i.i.d. rows from `N(0, Ω⁻¹)`: with `Ω = LL'`, each row solves `L'x = z`.
pub fn sample_predictors(n: usize, omega: &PrecisionMatrix, seed: u64) -> Result<DMatrix<f64>> {
    let p = omega.p();
    let chol = omega
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("precision matrix".into()))?;
    let upper = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column i of z is observation i
    let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let xt = upper
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok(xt.transpose())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Expected censored fraction `(1/n) Σ θ / (θ + exp(η_i))` for exponential
/// censoring at rate `θ = exp(log_theta)` against unit-baseline Cox times.
pub fn expected_censoring(log_theta: f64, eta: &[f64]) -> f64 {
    eta.iter().map(|&e| logistic(log_theta - e)).sum::<f64>() / eta.len() as f64
}

/// Censoring rate `θ` (as `log θ`) whose expected censored fraction is `target`.
pub fn calibrate_censoring(eta: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("censor rate must lie in (0, 1), got {target}")));
    }
    if eta.is_empty() {
        return Err(Error::InvalidData("no observations".into()));
    }
    let mut lo = -1.0;
    let mut hi = 1.0;
    while expected_censoring(lo, eta) > target {
        lo = 2.0 * lo - 1.0;
    }
    while expected_censoring(hi, eta) < target {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if expected_censoring(mid, eta) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Cox survival times with unit exponential baseline, `T = E · exp(−β0'x)`,
/// right-censored by independent `Exp(θ)` times calibrated to the target
/// censored fraction.
pub fn simulate_survival(
    x: &DMatrix<f64>,
    beta0: &DVector<f64>,
    target_censor_rate: f64,
    seed: u64,
) -> Result<SurvivalDataset> {
    ensure_len("coefficient vector", x.ncols(), beta0.len())?;
    let eta: Vec<f64> = (x * beta0).iter().copied().collect();
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("linear predictor"));
    }
    let log_theta = calibrate_censoring(&eta, target_censor_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clamp = |t: f64| t.clamp(f64::MIN_POSITIVE, f64::MAX);
    let mut times = Vec::with_capacity(eta.len());
    let mut status = Vec::with_capacity(eta.len());
    for &e in &eta {
        let event: f64 = rng.sample(Exp1);
        let censor: f64 = rng.sample(Exp1);
        let t = clamp((event.ln() - e).exp());
        let c = clamp((censor.ln() - log_theta).exp());
        times.push(t.min(c));
        status.push(t <= c);
    }
    break_ties(&mut times);
    SurvivalDataset::new(times, status, x.clone())
}

/// Multiplies the `k`-th repeat of a value by `1 + k·1e-12`.
fn break_ties(times: &mut [f64]) {
    let original = times.to_vec();
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| original[a].total_cmp(&original[b]).then(a.cmp(&b)));
    let mut k = 0;
    for w in 1..order.len() {
        if original[order[w]] == original[order[w - 1]] {
            k += 1;
            times[order[w]] = original[order[w]] * (1.0 + k as f64 * 1e-12);
        } else {
            k = 0;
        }
    }
}

/// One simulation benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudySpec {
    pub topology: GraphTopologySpec,
    pub n_train: usize,
    pub n_test: usize,
    pub censor_rate: f64,
    pub replications: usize,
    pub seed: u64,
    pub lambda_grid: LambdaGrid,
    pub tau_rule: TauRule,
    /// Defaults to [`CoefficientRule::default_for`] the topology.
    pub coefficients: Option<CoefficientRule>,
    pub folds: usize,
    pub criterion: CvCriterion,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            topology: GraphTopologySpec::ErdosRenyi {
                p: 100,
                p0: 0.01,
                seed: 0,
            },
            n_train: 100,
            n_test: 400,
            censor_rate: 0.3,
            replications: 20,
            seed: 0,
            lambda_grid: LambdaGrid::default(),
            tau_rule: TauRule::default(),
            coefficients: None,
            folds: 5,
            criterion: CvCriterion::default(),
        }
    }
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidParameter("training and test sizes must be positive".into()));
        }
        if !(self.censor_rate > 0.0 && self.censor_rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "censor rate must lie in (0, 1), got {}",
                self.censor_rate
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter("need at least 2 folds".into()));
        }
        self.lambda_grid.validate()
    }

    pub fn coefficient_rule(&self) -> CoefficientRule {
        self.coefficients.unwrap_or_else(|| CoefficientRule::default_for(&self.topology))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedStream {
    Graph = 1,
    TrainPredictors = 2,
    TestPredictors = 3,
    TrainSurvival = 4,
    TestSurvival = 5,
    CrossValidation = 6,
}

/// Independent seed for `(base, replication, stream)` via SplitMix64 mixing.
pub fn derive_seed(base: u64, replication: usize, stream: SeedStream) -> u64 {
    let mut z = base
        .wrapping_add((replication as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((stream as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything one replication of a study needs.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub graph: PredictorGraph,
    pub precision: PrecisionMatrix,
    pub beta0: DVector<f64>,
    pub train: SurvivalDataset,
    pub test: SurvivalDataset,
    pub cv_seed: u64,
}

pub fn generate_replication(spec: &StudySpec, index: usize) -> Result<Replication> {
    spec.validate()?;
    let seed = |stream| derive_seed(spec.seed, index, stream);
    let topology = spec.topology.with_seed(seed(SeedStream::Graph));
    let (precision, graph) = build_precision(&topology)?;
    let beta0 = true_coefficients(&precision, &graph, spec.coefficient_rule())?;
    let x_train = sample_predictors(spec.n_train, &precision, seed(SeedStream::TrainPredictors))?;
    let x_test = sample_predictors(spec.n_test, &precision, seed(SeedStream::TestPredictors))?;
    let train = simulate_survival(&x_train, &beta0, spec.censor_rate, seed(SeedStream::TrainSurvival))?;
    let test = simulate_survival(&x_test, &beta0, spec.censor_rate, seed(SeedStream::TestSurvival))?;
    Ok(Replication {
        index,
        graph,
        precision,
        beta0,
        train,
        test,
        cv_seed: seed(SeedStream::CrossValidation),
    })
}
