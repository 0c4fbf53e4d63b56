use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::linear::solve_symmetric;
use super::sigmoid;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LogisticModel {
    pub fn linear_predictor(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| self.intercept + r.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()).collect()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        self.linear_predictor(x).into_iter().map(sigmoid).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LogisticModel,
    pub iterations: usize,
    /// Penalized log-likelihood after each accepted step, starting from the
    /// all-zero initial point.
    pub objective_trace: Vec<f64>,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn objective(design: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, penalty: f64) -> f64 {
    let eta = design * beta;
    let ll: f64 = eta.iter().zip(y).map(|(&z, &t)| t * z - softplus(z)).sum();
    let pen: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    ll - 0.5 * penalty * pen
}

/// Ridge-penalized logistic regression by Newton/IRLS with step halving, so
/// the penalized log-likelihood never decreases between iterations. The
/// intercept is unpenalized.
pub fn logistic_fit(x: &Matrix, y: &[f64], penalty: f64, max_iter: usize) -> Result<LogisticFit> {
    let (n, p) = (x.nrows(), x.ncols());
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let mut beta = DVector::zeros(p + 1);
    let mut obj = objective(&design, y, &beta, penalty);
    let mut trace = vec![obj];

    for iter in 1..=max_iter {
        let eta = &design * &beta;
        let mut grad = DVector::zeros(p + 1);
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        let mut weighted = design.clone();
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let r = y[i] - mu;
            for j in 0..=p {
                grad[j] += design[(i, j)] * r;
                weighted[(i, j)] *= w;
            }
        }
        hess += design.tr_mul(&weighted);
        for j in 1..=p {
            grad[j] -= penalty * beta[j];
            hess[(j, j)] += penalty;
        }
        // tiny jitter keeps the intercept-only direction solvable under separation
        hess[(0, 0)] += 1e-12;
        let step = solve_symmetric(hess, grad.clone())?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &beta + &step * scale;
            let cand_obj = objective(&design, y, &candidate, penalty);
            if cand_obj.is_finite() && cand_obj >= obj - 1e-12 * obj.abs().max(1.0) {
                accepted = Some((candidate, cand_obj));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_obj)) = accepted else {
            // no ascent direction left: numerically at the optimum
            return Ok(finish(beta, iter, trace));
        };
        let max_change = (&next - &beta).amax();
        let obj_change = (next_obj - obj).abs();
        beta = next;
        obj = next_obj;
        trace.push(obj);
        if max_change < 1e-9 || (obj_change < 1e-13 * obj.abs().max(1.0) && grad.amax() < 1e-6) {
            return Ok(finish(beta, iter, trace));
        }
    }
    Err(Error::IrlsDivergence { iterations: max_iter })
}

fn finish(beta: DVector<f64>, iterations: usize, objective_trace: Vec<f64>) -> LogisticFit {
    let model = LogisticModel { intercept: beta[0], coef: beta.iter().skip(1).copied().collect() };
    LogisticFit { model, iterations, objective_trace }
}
