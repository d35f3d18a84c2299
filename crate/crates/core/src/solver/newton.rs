use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::survival::{evaluate, negative_partial_log_likelihood, Order, SurvivalDataset};

use super::{FitConfig, FitResult};

/// Coefficient magnitude beyond which an unpenalized fit is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e3;

const GRAD_TOL: f64 = 1e-6;
// gradient level at which a degenerate direction counts as flat
const FLAT_GRAD: f64 = 1e-8;
// smallest Hessian eigenvalue treated as non-degenerate
const SINGULAR_EIGENVALUE: f64 = 1e-10;
const JITTER: f64 = 1e-8;
// Newton steps below this (relative to max(1, ‖β‖∞)) are rounding noise
const STEP_TOL: f64 = 1e-8;

fn newton_direction(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = hessian.clone().cholesky() {
        let d = chol.solve(&-gradient);
        if d.iter().all(|v| v.is_finite()) {
            return d;
        }
    }
    log::warn!("singular Hessian in Newton step, adding {JITTER:e} ridge jitter");
    let mut jittered = hessian.clone();
    for k in 0..jittered.nrows() {
        jittered[(k, k)] += JITTER;
    }
    match jittered.clone().cholesky() {
        Some(chol) => chol.solve(&-gradient),
        // indefinite only through rounding; fall back to steepest descent
        None => -gradient.clone(),
    }
}

/// Damped Newton–Raphson on `-(1/n)ℓ(β)` from `β = 0`. `config.lambda` is
/// ignored.
///
/// Stops with `converged = true` once `‖∇f‖₂ < 1e-6` and either the Newton
/// step or the objective decrease is at rounding level. A fit whose
/// coefficients exceed [`DIVERGENCE_BOUND`], or that flattens out along a
/// degenerate Hessian direction, has no finite maximizer: it is flagged `diverged` with its
/// coefficients clamped to `±DIVERGENCE_BOUND`.
pub fn fit_cox_newton(data: &SurvivalDataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let p = data.p();
    let mut beta = DVector::zeros(p);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;

    loop {
        let e = evaluate(&beta, data, Order::Hessian)?;
        let grad = e.gradient.expect("gradient");
        let hess = e.hessian.expect("hessian");
        trace.push(e.value);

        let degenerate = p > 0 && hess.clone().symmetric_eigenvalues().min() < SINGULAR_EIGENVALUE;
        let direction = newton_direction(&hess, &grad);
        let gnorm = grad.norm();
        // at a maximizer the Newton step vanishes; along a separating
        // direction it stays O(1) while the curvature decays
        let negligible = direction.amax() <= STEP_TOL * beta.amax().max(1.0);
        if gnorm < GRAD_TOL && (negligible || data.event_count() == 0) {
            converged = true;
            break;
        }
        if degenerate && gnorm < FLAT_GRAD {
            diverged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;

        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &beta + &direction * step;
            if candidate.iter().all(|v| v.is_finite()) {
                let value = negative_partial_log_likelihood(&candidate, data)?;
                if value <= e.value + 1e-4 * step * slope {
                    accepted = Some((candidate, value));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, value)) = accepted else {
            if degenerate {
                diverged = true;
            } else {
                converged = gnorm < GRAD_TOL;
            }
            break;
        };
        let stalled = e.value - value <= 4.0 * f64::EPSILON * e.value.abs();
        beta = next;
        if beta.amax() > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
        if stalled {
            // no further decrease representable in floating point
            trace.push(value);
            if degenerate {
                diverged = true;
            } else {
                converged = gnorm < GRAD_TOL;
            }
            break;
        }
    }

    if diverged {
        beta.apply(|b| *b = b.clamp(-DIVERGENCE_BOUND, DIVERGENCE_BOUND));
        trace.push(negative_partial_log_likelihood(&beta, data)?);
        converged = false;
    }

    Ok(FitResult {
        beta,
        decomposition: None,
        expanded: None,
        objective_trace: trace,
        iterations,
        converged,
        diverged,
        lambda: 0.0,
        penalty: "cox_unregularized".into(),
    })
}
