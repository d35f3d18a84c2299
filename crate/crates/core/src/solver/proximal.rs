//! Proximal gradient with backtracking, optionally accelerated (FISTA) with
//! function-value restart.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// `F(w) = s(w) + r(w)` with `s` smooth and `r` prox-friendly.
pub(crate) trait CompositeProblem {
    fn smooth_value(&self, w: &DVector<f64>) -> Result<f64>;
    fn smooth_gradient(&self, w: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
    fn nonsmooth(&self, w: &DVector<f64>) -> f64;
    fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64>;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iter: usize,
    pub tol: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub acceleration: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub w: DVector<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const MIN_STEP: f64 = 1e-20;

pub(crate) fn minimize<P: CompositeProblem>(problem: &P, w0: DVector<f64>, settings: &Settings) -> Result<Outcome> {
    let mut x = w0;
    let mut objective = problem.smooth_value(&x)? + problem.nonsmooth(&x);
    if !objective.is_finite() {
        return Err(Error::Numerical("objective is not finite at the starting point".into()));
    }
    let mut trace = vec![objective];
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut at_x = true;
    let mut step = settings.initial_step;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iter {
        iterations += 1;
        let (s_y, g_y) = problem.smooth_gradient(&y)?;

        let (x_new, s_new, diff) = loop {
            let candidate = problem.prox(&(&y - &g_y * step), step);
            let diff = &candidate - &y;
            let s_c = problem.smooth_value(&candidate)?;
            let bound = s_y + g_y.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if s_c <= bound + 1e-12 * s_y.abs().max(1.0) || step < MIN_STEP {
                break (candidate, s_c, diff);
            }
            step *= settings.shrink;
        };
        let f_new = s_new + problem.nonsmooth(&x_new);

        if settings.acceleration && !at_x && !(f_new <= objective) {
            // momentum overshot; restart from the last accepted iterate
            y.copy_from(&x);
            momentum = 1.0;
            at_x = true;
            continue;
        }

        let grad_map = diff.norm() / step;
        let rel_change = (objective - f_new).abs() / objective.abs().max(1.0);
        let x_prev = std::mem::replace(&mut x, x_new);
        objective = f_new;
        trace.push(objective);

        if rel_change < settings.tol && grad_map < settings.tol {
            converged = true;
            break;
        }

        if settings.acceleration {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            y = &x + (&x - &x_prev) * beta;
            momentum = next;
            at_x = beta == 0.0;
        } else {
            y.copy_from(&x);
        }
    }

    Ok(Outcome {
        w: x,
        trace,
        iterations,
        converged,
    })
}
