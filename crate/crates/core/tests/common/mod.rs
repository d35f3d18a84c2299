//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use graphcox::{PredictorGraph, SurvivalDataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_vector(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(p, |_, _| scale * normal(rng))
}

/// Random dataset with distinct event times. Roughly `censor_prob` of the
/// rows are censored, and some censored rows copy another row's time so
/// censored ties (including ties with events) are exercised.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, censor_prob: f64) -> SurvivalDataset {
    let x = DMatrix::from_fn(n, p, |_, _| normal(rng));
    let status: Vec<bool> = (0..n).map(|_| !rng.random_bool(censor_prob)).collect();
    let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 + 0.01).collect();
    for i in 0..n {
        if !status[i] && n > 1 && rng.random_bool(0.3) {
            times[i] = times[rng.random_range(0..n)];
        }
    }
    SurvivalDataset::new(times, status, x).unwrap()
}

fn risk_set(data: &SurvivalDataset, i: usize) -> Vec<usize> {
    (0..data.n()).filter(|&j| data.times()[j] >= data.times()[i]).collect()
}

fn eta(beta: &DVector<f64>, data: &SurvivalDataset, j: usize) -> f64 {
    (0..data.p()).map(|k| data.covariates()[(j, k)] * beta[k]).sum()
}

/// `-(1/n) Σ_{δ_i=1} [η_i − log Σ_{y_j ≥ y_i} exp η_j]`, one risk set at a time.
pub fn naive_nll(beta: &DVector<f64>, data: &SurvivalDataset) -> f64 {
    let mut total = 0.0;
    for i in 0..data.n() {
        if !data.status()[i] {
            continue;
        }
        let denom: f64 = risk_set(data, i).iter().map(|&j| eta(beta, data, j).exp()).sum();
        total += eta(beta, data, i) - denom.ln();
    }
    -total / data.n() as f64
}

fn weighted_moments(beta: &DVector<f64>, data: &SurvivalDataset, i: usize) -> (DVector<f64>, DMatrix<f64>) {
    let p = data.p();
    let set = risk_set(data, i);
    let w: Vec<f64> = set.iter().map(|&j| eta(beta, data, j).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut mean = DVector::zeros(p);
    let mut second = DMatrix::zeros(p, p);
    for (&j, &wj) in set.iter().zip(&w) {
        let xj = data.covariates().row(j).transpose();
        mean += &xj * (wj / total);
        second += &xj * xj.transpose() * (wj / total);
    }
    (mean, second)
}

pub fn naive_gradient(beta: &DVector<f64>, data: &SurvivalDataset) -> DVector<f64> {
    let mut g = DVector::zeros(data.p());
    for i in 0..data.n() {
        if data.status()[i] {
            let (mean, _) = weighted_moments(beta, data, i);
            g += data.covariates().row(i).transpose() - mean;
        }
    }
    g * (-1.0 / data.n() as f64)
}

pub fn naive_hessian(beta: &DVector<f64>, data: &SurvivalDataset) -> DMatrix<f64> {
    let p = data.p();
    let mut h = DMatrix::zeros(p, p);
    for i in 0..data.n() {
        if data.status()[i] {
            let (mean, second) = weighted_moments(beta, data, i);
            h += second - &mean * mean.transpose();
        }
    }
    h / data.n() as f64
}

pub fn central_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |k, _| {
        let mut up = x.clone();
        let mut down = x.clone();
        up[k] += h;
        down[k] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

pub fn central_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let mut up = x.clone();
        let mut down = x.clone();
        up[k] += h;
        down[k] -= h;
        jac.set_column(k, &((f(&up) - f(&down)) / (2.0 * h)));
    }
    jac
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(floor)
}

/// Downhill simplex with standard coefficients; returns the best vertex.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], scale: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let d = x0.len();
    if d == 0 {
        return (vec![], f(&[]));
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..d {
        let mut v = x0.to_vec();
        v[k] += scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = d + 1;
    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        let spread = simplex[1..].iter().map(|v| dist(v, &simplex[0])).fold(0.0, f64::max);
        if spread < 1e-13 && (values[d] - values[0]).abs() < 1e-15 {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect() };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
        } else {
            let contracted = if fr < values[d] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < values[d].min(fr) {
                simplex[d] = contracted;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> = (0..d).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
                evals += d;
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Cost of the decomposition of `beta` parameterized by the off-diagonal
/// entries `V^(k)_j` (`j ∈ N_k`, `j ≠ k`); each diagonal entry `V^(j)_j`
/// absorbs the remainder so `Σ_k V^(k) = β` holds exactly.
pub fn decomposition_cost(beta: &[f64], graph: &PredictorGraph, tau: &[f64], free: &[f64]) -> f64 {
    let p = graph.p();
    let mut v = vec![vec![0.0; p]; p];
    let mut c = 0;
    for k in 0..p {
        for &j in graph.neighborhood(k) {
            if j != k {
                v[k][j] = free[c];
                c += 1;
            }
        }
    }
    for j in 0..p {
        let others: f64 = (0..p).filter(|&k| k != j).map(|k| v[k][j]).sum();
        v[j][j] = beta[j] - others;
    }
    (0..p).map(|k| tau[k] * v[k].iter().map(|x| x * x).sum::<f64>().sqrt()).sum()
}

/// Brute-force graph norm: Nelder–Mead over the free decomposition
/// coordinates from `starts` random points, each polished by restarts.
pub fn brute_force_graph_norm(beta: &[f64], graph: &PredictorGraph, tau: &[f64], starts: usize, seed: u64) -> f64 {
    let free = 2 * graph.edge_count();
    let f = |z: &[f64]| decomposition_cost(beta, graph, tau, z);
    if free == 0 {
        return f(&[]);
    }
    let mut rng = rng(seed);
    let scale = beta.iter().map(|b| b.abs()).fold(0.0, f64::max).max(1e-3);
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let x0: Vec<f64> = (0..free).map(|_| scale * normal(&mut rng)).collect();
        let (mut x, mut fx) = nelder_mead(&f, &x0, scale, 20_000);
        let mut step = scale;
        for _ in 0..60 {
            let (x2, f2) = nelder_mead(&f, &x, step, 20_000);
            if f2 < fx - 1e-14 {
                x = x2;
                fx = f2;
            } else {
                step *= 0.3;
                if step < 1e-10 * scale {
                    break;
                }
            }
        }
        best = best.min(fx);
    }
    best
}

/// Exhaustive Harrell c-index: comparable iff `y_i < y_j` and `δ_i = 1`.
pub fn naive_c_index(scores: &[f64], times: &[f64], status: &[bool]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if status[i] && times[i] < times[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// `(1/m) Σ_i (Σ_j x_ij d_j)²` by explicit loops.
pub fn naive_rpe(beta_hat: &[f64], beta0: &[f64], x: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let mut s = 0.0;
        for j in 0..x.ncols() {
            s += x[(i, j)] * (beta_hat[j] - beta0[j]);
        }
        total += s * s;
    }
    total / x.nrows() as f64
}
