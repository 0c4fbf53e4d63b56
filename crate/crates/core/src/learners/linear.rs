use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Ridge-regularized least squares with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter().map(|r| self.intercept + r.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()).collect()
    }
}

pub(crate) fn column_means(x: &Matrix) -> Vec<f64> {
    let mut means = vec![0.0; x.ncols()];
    for r in x.rows_iter() {
        means.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    means.iter_mut().for_each(|m| *m /= x.nrows() as f64);
    means
}

/// Solves the symmetric system `a x = b`, falling back from Cholesky to LU
/// when `a` is only semi-definite.
pub(crate) fn solve_symmetric(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(&b));
    }
    a.lu().solve(&b).ok_or_else(|| Error::InvalidInput("singular normal equations".into()))
}

/// Minimizes `|y - b0 - X b|^2 + penalty |b|^2`. The intercept is recovered
/// from the centered problem.
pub fn ridge_fit(x: &Matrix, y: &[f64], penalty: f64) -> Result<LinearModel> {
    let (n, p) = (x.nrows(), x.ncols());
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - xm[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let mut gram = xc.tr_mul(&xc);
    for j in 0..p {
        gram[(j, j)] += penalty;
    }
    let beta = solve_symmetric(gram, xc.tr_mul(&yc))?;
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = ym - coef.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel { intercept, coef })
}
