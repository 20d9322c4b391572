//! One-dimensional gradient ascent with a central finite-difference gradient and
//! backtracking line search.
//!
//! Step lengths are in parameter units: a trial point is `x + step·sign(g)`. Scaling by
//! `|g|` instead lets a steep log-likelihood leap across valleys into distant modes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentConfig {
    /// Longest step, in parameter units.
    pub initial_step: f64,
    pub backtrack: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Finite-difference half-width.
    pub fd_step: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            backtrack: 0.5,
            max_iters: 50,
            grad_tol: 1e-5,
            fd_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentResult {
    pub x: f64,
    pub value: f64,
    pub iters: usize,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 60;
/// Armijo sufficient-increase constant.
const ARMIJO: f64 = 0.25;

/// Maximizes `f` over `[lo, hi]` starting from `x0`.
///
/// Steps must pass an Armijo sufficient-increase test, so the returned value is never
/// below `f(x0)`.
/// Evaluations returning `None` or non-finite values are treated as `−∞`.
pub fn gradient_ascent(
    f: impl Fn(f64) -> Option<f64>,
    x0: f64,
    (lo, hi): (f64, f64),
    cfg: &AscentConfig,
) -> AscentResult {
    let eval = |x: f64| f(x).filter(|v| v.is_finite()).unwrap_or(f64::NEG_INFINITY);
    let mut x = x0.clamp(lo, hi);
    let mut fx = eval(x);
    let mut alpha = cfg.initial_step;
    let h = cfg.fd_step;
    for it in 0..cfg.max_iters {
        let (xm, xp) = ((x - h).max(lo), (x + h).min(hi));
        let g = (eval(xp) - eval(xm)) / (xp - xm);
        if !g.is_finite() {
            return AscentResult {
                x,
                value: fx,
                iters: it,
                converged: false,
            };
        }
        if g.abs() <= cfg.grad_tol {
            return AscentResult {
                x,
                value: fx,
                iters: it,
                converged: true,
            };
        }
        let mut step = alpha;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let xn = (x + step * g.signum()).clamp(lo, hi);
            if xn == x {
                break;
            }
            let fxn = eval(xn);
            if fxn > fx && fxn - fx >= ARMIJO * g * (xn - x) {
                x = xn;
                fx = fxn;
                accepted = true;
                break;
            }
            step *= cfg.backtrack;
        }
        if !accepted {
            // no representable ascent step along the gradient: stationary to working precision
            return AscentResult {
                x,
                value: fx,
                iters: it + 1,
                converged: true,
            };
        }
        // let the step grow back after a successful search, up to the initial length
        alpha = (step / cfg.backtrack).min(cfg.initial_step).max(f64::MIN_POSITIVE);
    }
    AscentResult {
        x,
        value: fx,
        iters: cfg.max_iters,
        converged: false,
    }
}
