//! Right-censored survival data and the Cox partial likelihood.
//!
//! The objective evaluated here is the negative partial log-likelihood scaled
//! by `1/n`,
//!
//! ```text
//! f(β) = -(1/n) Σ_{i: δ_i = 1} [ β'x_i - log Σ_{j: y_j ≥ y_i} exp(β'x_j) ]
//! ```
//!
//! together with its gradient and Hessian. Each is computed from passes over
//! the observations in time order, keeping running risk-set sums relative to
//! the largest linear predictor seen so far so that nothing overflows for
//! large `β'x`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_len, Error, Result};

/// Observations sorted by descending time, grouped into blocks of equal time.
///
/// Every observation in a block belongs to the risk set of every event in that
/// block (`y_j ≥ y_i` includes equality), so a block is added to the running
/// sums in full before its events are scored.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSetOrder {
    order: Vec<usize>,
    blocks: Vec<Range<usize>>,
    risk_set_sizes: Vec<(usize, usize)>,
}

impl RiskSetOrder {
    fn build(times: &[f64], status: &[bool]) -> Result<Self> {
        let n = times.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));

        let mut blocks = Vec::new();
        let mut start = 0;
        while start < n {
            let t = times[order[start]];
            let mut end = start + 1;
            while end < n && times[order[end]] == t {
                end += 1;
            }
            let events = order[start..end].iter().filter(|&&i| status[i]).count();
            if events > 1 {
                return Err(Error::TiedEventTimes(t));
            }
            blocks.push(start..end);
            start = end;
        }

        let mut risk_set_sizes = Vec::new();
        for block in &blocks {
            for &i in &order[block.clone()] {
                if status[i] {
                    risk_set_sizes.push((i, block.end));
                }
            }
        }
        // earliest event first
        risk_set_sizes.reverse();

        Ok(Self {
            order,
            blocks,
            risk_set_sizes,
        })
    }

    /// Permutation of observation indices giving non-increasing times.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `(event index, |{j : y_j ≥ y_i}|)` for every event, earliest event first.
    pub fn risk_set_sizes(&self) -> &[(usize, usize)] {
        &self.risk_set_sizes
    }

    pub(crate) fn blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.blocks.iter().map(|b| &self.order[b.clone()])
    }
}

#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    status: Vec<bool>,
    covariates: DMatrix<f64>,
    // p×n copy so observation rows are contiguous columns
    rows: DMatrix<f64>,
    feature_names: Vec<String>,
    risk: RiskSetOrder,
}

impl SurvivalDataset {
    /// Builds a dataset, validating times, covariates and the no-tied-events
    /// assumption. Feature names default to `x1..xp`.
    pub fn new(times: Vec<f64>, status: Vec<bool>, covariates: DMatrix<f64>) -> Result<Self> {
        let n = times.len();
        ensure_len("status length", n, status.len())?;
        ensure_len("covariate rows", n, covariates.nrows())?;
        if let Some(&t) = times.iter().find(|t| !t.is_finite() || **t <= 0.0) {
            return Err(Error::InvalidData(format!(
                "times must be strictly positive and finite, found {t}"
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        let risk = RiskSetOrder::build(&times, &status)?;
        let feature_names = (1..=covariates.ncols()).map(|j| format!("x{j}")).collect();
        let rows = covariates.transpose();
        Ok(Self {
            times,
            status,
            covariates,
            rows,
            feature_names,
            risk,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        ensure_len("feature names", self.p(), names.len())?;
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn risk_order(&self) -> &RiskSetOrder {
        &self.risk
    }

    pub fn event_count(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }

    /// Row `i` of the covariate matrix as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.rows.as_slice()[i * p..(i + 1) * p]
    }

    pub fn linear_predictor(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        check_beta(beta, self.p())?;
        Ok(&self.covariates * beta)
    }

    /// Dataset restricted to the given observation indices (in that order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidParameter(format!(
                "observation index {i} out of range for n = {}",
                self.n()
            )));
        }
        let times = indices.iter().map(|&i| self.times[i]).collect();
        let status = indices.iter().map(|&i| self.status[i]).collect();
        let covariates = self.covariates.select_rows(indices);
        Self::new(times, status, covariates)?.with_feature_names(self.feature_names.clone())
    }

    /// Same observations with every time multiplied by `factor > 0`.
    pub fn rescale_times(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time scale factor must be positive, got {factor}"
            )));
        }
        let times = self.times.iter().map(|t| t * factor).collect();
        Self::new(times, self.status.clone(), self.covariates.clone())?
            .with_feature_names(self.feature_names.clone())
    }
}

fn check_beta(beta: &DVector<f64>, p: usize) -> Result<()> {
    ensure_len("coefficient vector", p, beta.len())?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("coefficients"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Running risk-set sums `Σ w_j`, `Σ w_j x_j`, `Σ w_j x_j x_j'` with
/// `w_j = exp(η_j - shift)`, where `shift` is the largest η added so far.
struct RiskSums {
    shift: f64,
    s0: f64,
    s1: DVector<f64>,
    s2: Option<DMatrix<f64>>,
}

impl RiskSums {
    fn new(p: usize, order: Order) -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            s0: 0.0,
            s1: DVector::zeros(if order >= Order::Gradient { p } else { 0 }),
            s2: (order == Order::Hessian).then(|| DMatrix::zeros(p, p)),
        }
    }

    fn add(&mut self, eta: f64, x: &[f64]) {
        if eta > self.shift {
            let scale = (self.shift - eta).exp();
            self.s0 *= scale;
            self.s1 *= scale;
            if let Some(s2) = self.s2.as_mut() {
                *s2 *= scale;
            }
            self.shift = eta;
        }
        let w = (eta - self.shift).exp();
        self.s0 += w;
        if !self.s1.is_empty() {
            for (s, &xj) in self.s1.iter_mut().zip(x) {
                *s += w * xj;
            }
        }
        if let Some(s2) = self.s2.as_mut() {
            let p = x.len();
            for c in 0..p {
                let wc = w * x[c];
                let col = &mut s2.as_mut_slice()[c * p..(c + 1) * p];
                for (s, &xr) in col.iter_mut().zip(x) {
                    *s += wc * xr;
                }
            }
        }
    }

    fn log_sum(&self) -> f64 {
        self.shift + self.s0.ln()
    }
}

pub(crate) fn evaluate(beta: &DVector<f64>, data: &SurvivalDataset, order: Order) -> Result<Evaluation> {
    check_beta(beta, data.p())?;
    if order == Order::Hessian {
        evaluate_second_order(beta, data)
    } else {
        Ok(evaluate_first_order(beta, data, order))
    }
}

/// Value and gradient without per-observation vector work: one descending
/// pass gives `log S0` per time block, one ascending pass accumulates
/// `a_j = Σ_{i ∈ events, y_i ≤ y_j} w_j / S0_i`, and the gradient is
/// `-(1/n) X'(δ - a)`.
fn evaluate_first_order(beta: &DVector<f64>, data: &SurvivalDataset, order: Order) -> Evaluation {
    let n = data.n();
    let eta = &data.covariates * beta;
    let blocks: Vec<&[usize]> = data.risk.blocks().collect();

    let mut log_s0 = vec![0.0; blocks.len()];
    let mut events = vec![0usize; blocks.len()];
    let (mut shift, mut s0) = (f64::NEG_INFINITY, 0.0);
    let mut loglik = 0.0;
    for (b, block) in blocks.iter().enumerate() {
        for &j in *block {
            let e = eta[j];
            if e > shift {
                s0 *= (shift - e).exp();
                shift = e;
            }
            s0 += (e - shift).exp();
        }
        log_s0[b] = shift + s0.ln();
        for &i in block.iter().filter(|&&i| data.status[i]) {
            events[b] += 1;
            loglik += eta[i] - log_s0[b];
        }
    }

    let scale = 1.0 / n as f64;
    let gradient = (order == Order::Gradient).then(|| {
        let mut residual = DVector::<f64>::zeros(n);
        let mut log_cum = f64::NEG_INFINITY;
        for (b, block) in blocks.iter().enumerate().rev() {
            if events[b] > 0 {
                let term = (events[b] as f64).ln() - log_s0[b];
                log_cum = log_sum_exp(log_cum, term);
            }
            for &j in *block {
                residual[j] = data.status[j] as u8 as f64 - (eta[j] + log_cum).exp();
            }
        }
        data.covariates.tr_mul(&residual) * -scale
    });
    Evaluation {
        value: -loglik * scale,
        gradient,
        hessian: None,
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn evaluate_second_order(beta: &DVector<f64>, data: &SurvivalDataset) -> Result<Evaluation> {
    let order = Order::Hessian;
    let p = data.p();
    let n = data.n();
    let eta = &data.covariates * beta;

    let mut sums = RiskSums::new(p, order);
    let mut loglik = 0.0;
    let mut grad = (order >= Order::Gradient).then(|| DVector::<f64>::zeros(p));
    let mut hess = (order == Order::Hessian).then(|| DMatrix::<f64>::zeros(p, p));
    let mut mean = DVector::<f64>::zeros(p);

    for block in data.risk.blocks() {
        for &j in block {
            sums.add(eta[j], data.row(j));
        }
        for &i in block.iter().filter(|&&i| data.status[i]) {
            loglik += eta[i] - sums.log_sum();
            if let Some(g) = grad.as_mut() {
                mean.copy_from(&sums.s1);
                mean /= sums.s0;
                for ((gk, &xk), &mk) in g.iter_mut().zip(data.row(i)).zip(mean.iter()) {
                    *gk += xk - mk;
                }
            }
            if let (Some(h), Some(s2)) = (hess.as_mut(), sums.s2.as_ref()) {
                *h += s2 * (1.0 / sums.s0);
                h.ger(-1.0, &mean, &mean, 1.0);
            }
        }
    }

    let scale = 1.0 / n as f64;
    Ok(Evaluation {
        value: -loglik * scale,
        gradient: grad.map(|g| g * -scale),
        hessian: hess.map(|h| {
            let h = h * scale;
            // exact symmetry; the rank-one updates only approximately preserve it
            (&h + h.transpose()) * 0.5
        }),
    })
}

/// `-(1/n) ℓ(β)`.
pub fn negative_partial_log_likelihood(beta: &DVector<f64>, data: &SurvivalDataset) -> Result<f64> {
    Ok(evaluate(beta, data, Order::Value)?.value)
}

/// Gradient of [`negative_partial_log_likelihood`], i.e. `-(1/n) U(β)`.
pub fn partial_gradient(beta: &DVector<f64>, data: &SurvivalDataset) -> Result<DVector<f64>> {
    Ok(evaluate(beta, data, Order::Gradient)?
        .gradient
        .expect("gradient requested"))
}

/// Hessian of [`negative_partial_log_likelihood`], i.e. `-(1/n) S(β)`.
pub fn partial_hessian(beta: &DVector<f64>, data: &SurvivalDataset) -> Result<DMatrix<f64>> {
    Ok(evaluate(beta, data, Order::Hessian)?
        .hessian
        .expect("hessian requested"))
}

/// Value and gradient from one pass.
pub fn value_and_gradient(beta: &DVector<f64>, data: &SurvivalDataset) -> Result<(f64, DVector<f64>)> {
    let e = evaluate(beta, data, Order::Gradient)?;
    Ok((e.value, e.gradient.expect("gradient requested")))
}
