//! Evaluation measures: Harrell's c-index, coefficient ℓ2 error, relative
//! prediction error, and mean(sd) aggregation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Concordant, tied and comparable pair counts. Ratios are formed once from
/// integers so the fast and reference implementations agree exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConcordanceCounts {
    pub concordant: u64,
    pub tied: u64,
    pub comparable: u64,
}

impl ConcordanceCounts {
    pub fn index(&self) -> Result<f64> {
        if self.comparable == 0 {
            return Err(Error::NoComparablePairs);
        }
        Ok((2 * self.concordant + self.tied) as f64 / (2 * self.comparable) as f64)
    }
}

fn check_lengths(scores: &[f64], times: &[f64], status: &[bool]) -> Result<()> {
    ensure_len("times", scores.len(), times.len())?;
    ensure_len("status", scores.len(), status.len())?;
    if scores.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scores or times"));
    }
    Ok(())
}

/// Exhaustive pair enumeration. Pair `(i, j)` is comparable when
/// `y_i < y_j` and `δ_i = 1`; concordant when `score_i > score_j`.
pub fn concordance_counts_naive(scores: &[f64], times: &[f64], status: &[bool]) -> Result<ConcordanceCounts> {
    check_lengths(scores, times, status)?;
    let mut counts = ConcordanceCounts::default();
    for i in 0..scores.len() {
        if !status[i] {
            continue;
        }
        for j in 0..scores.len() {
            if times[i] < times[j] {
                counts.comparable += 1;
                if scores[i] > scores[j] {
                    counts.concordant += 1;
                } else if scores[i] == scores[j] {
                    counts.tied += 1;
                }
            }
        }
    }
    Ok(counts)
}

struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< i`.
    fn prefix(&self, mut i: usize) -> u64 {
        let mut total = 0;
        while i > 0 {
            total += self.0[i];
            i &= i - 1;
        }
        total
    }
}

/// Same counts as [`concordance_counts_naive`] in `O(n log n)`: sweep times
/// downward, inserting each tie block into a Fenwick tree over score ranks
/// only after its events have been scored.
pub fn concordance_counts(scores: &[f64], times: &[f64], status: &[bool]) -> Result<ConcordanceCounts> {
    check_lengths(scores, times, status)?;
    let n = scores.len();
    let mut sorted_scores = scores.to_vec();
    sorted_scores.sort_by(f64::total_cmp);
    sorted_scores.dedup();
    let rank = |s: f64| sorted_scores.partition_point(|&v| v < s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut tree = Fenwick(vec![0; sorted_scores.len() + 1]);
    let mut inserted = 0u64;
    let mut counts = ConcordanceCounts::default();
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start + 1;
        while end < n && times[order[end]] == t {
            end += 1;
        }
        for &i in &order[start..end] {
            if status[i] {
                let r = rank(scores[i]);
                let below = tree.prefix(r);
                let at_or_below = tree.prefix(r + 1);
                counts.comparable += inserted;
                counts.concordant += below;
                counts.tied += at_or_below - below;
            }
        }
        for &i in &order[start..end] {
            tree.add(rank(scores[i]));
            inserted += 1;
        }
        start = end;
    }
    Ok(counts)
}

/// Harrell's c-index with risk scores where higher means shorter survival.
/// Tied scores count one half. Errors when no pair is comparable.
pub fn c_index(scores: &[f64], times: &[f64], status: &[bool]) -> Result<f64> {
    concordance_counts(scores, times, status)?.index()
}

/// `(‖β̂ − β0‖₂, (1/m)(β̂ − β0)'X'X(β̂ − β0))` on an `m × p` test design.
pub fn prediction_errors(beta_hat: &DVector<f64>, beta0: &DVector<f64>, x_test: &DMatrix<f64>) -> Result<(f64, f64)> {
    ensure_len("true coefficients", beta_hat.len(), beta0.len())?;
    ensure_len("test design columns", beta_hat.len(), x_test.ncols())?;
    if x_test.nrows() == 0 {
        return Err(Error::InvalidData("empty test design".into()));
    }
    let diff = beta_hat - beta0;
    let rpe = (x_test * &diff).norm_squared() / x_test.nrows() as f64;
    Ok((diff.norm(), rpe))
}

/// Mean and sample (n − 1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    /// Two-pass computation; `sd = 0` for a single value.
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, count }
    }
}

/// Welford accumulator for streaming aggregation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningSummary {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningSummary {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn summary(&self) -> Summary {
        match self.count {
            0 => Summary::of(&[]),
            1 => Summary {
                mean: self.mean,
                sd: 0.0,
                count: 1,
            },
            n => Summary {
                mean: self.mean,
                sd: (self.m2 / (n - 1) as f64).sqrt(),
                count: n,
            },
        }
    }
}

/// Metrics of one fitted model on one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub l2_error: f64,
    pub rpe: f64,
    pub c_index: f64,
}
