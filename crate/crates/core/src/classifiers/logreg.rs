//! L2-regularized logistic regression fitted by full-batch gradient descent
//! with Armijo backtracking.
//!
//! Objective on standardized inputs:
//! `sum_i log(1 + exp(-s_i (w.x_i + b))) + |w|^2 / (2C)` with `s_i = ±1`.
//! The bias is not penalized.

use serde::{Deserialize, Serialize};

use super::{check_training_set, fit_scaler, ModelError, StandardScaler};

const MAX_ITERATIONS: usize = 5000;
const GRAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scaler: StandardScaler,
    pub solver: String,
    pub report: LogRegReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegReport {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

/// `log(1 + exp(-m))` without overflow.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Objective value on already-scaled rows.
pub fn logistic_objective(x: &[Vec<f64>], y: &[u8], weights: &[f64], bias: f64, c: f64) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = dot(row, weights) + bias;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            log1p_exp_neg(sign * z)
        })
        .sum();
    loss + weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient(x: &[Vec<f64>], y: &[u8], weights: &[f64], bias: f64, c: f64) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = weights.iter().map(|w| w / c).collect();
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let residual = sigmoid(dot(row, weights) + bias) - label as f64;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += residual * v;
        }
        gb += residual;
    }
    (gw, gb)
}

pub fn train_logreg(x: &[Vec<f64>], y: &[u8], c: f64, solver: &str) -> Result<LogRegModel, ModelError> {
    let width = check_training_set(x, y)?;
    if !(c > 0.0) {
        return Err(ModelError::InvalidParams("C must be > 0".into()));
    }
    let scaler = fit_scaler(x)?;
    let xs = scaler.transform(x);

    let mut weights = vec![0.0; width];
    let mut bias = 0.0;
    let mut objective = logistic_objective(&xs, y, &weights, bias, c);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        let (gw, gb) = gradient(&xs, y, &weights, bias, c);
        let grad_inf = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if grad_inf < GRAD_TOLERANCE {
            converged = true;
            break;
        }
        let grad_sq = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        let mut t = step * 2.0;
        let (cand_w, cand_b, cand_obj) = loop {
            let cw: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - t * g).collect();
            let cb = bias - t * gb;
            let obj = logistic_objective(&xs, y, &cw, cb, c);
            if obj <= objective - 0.5 * t * grad_sq || t < 1e-18 {
                break (cw, cb, obj);
            }
            t *= 0.5;
        };
        if cand_obj > objective {
            // line search exhausted without progress: at numerical optimum
            converged = true;
            break;
        }
        weights = cand_w;
        bias = cand_b;
        objective = cand_obj;
        step = t;
        iterations += 1;
    }
    Ok(LogRegModel {
        weights,
        bias,
        scaler,
        solver: solver.to_string(),
        report: LogRegReport {
            iterations,
            converged,
            objective,
        },
    })
}

impl LogRegModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.scaler.transform_row(row), &self.weights) + self.bias
    }

    /// Class 1 when the decision value is strictly positive.
    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}
