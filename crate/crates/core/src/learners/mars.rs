//! A compact multivariate adaptive regression splines learner.
//!
//! Forward pass: greedily add reflected hinge pairs `h(x - t), h(t - x)`
//! (times an existing parent term when interactions are allowed) that most
//! reduce the residual sum of squares, scoring candidates against an
//! orthonormalized copy of the current basis. Backward pass: drop terms one
//! at a time and keep the subset with the best generalized cross-validation
//! score. For binary targets the selected basis is refit by penalized
//! logistic regression.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::linear::solve_symmetric;
use super::logistic::logistic_fit;
use super::{sigmoid, LearnerSpec, Task};
use crate::error::Result;
use crate::matrix::Matrix;

const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hinge {
    pub var: usize,
    pub knot: f64,
    /// `+1` for `max(0, x - knot)`, `-1` for `max(0, knot - x)`.
    pub sign: i8,
}

impl Hinge {
    #[inline]
    fn eval(&self, row: &[f64]) -> f64 {
        let d = if self.sign > 0 { row[self.var] - self.knot } else { self.knot - row[self.var] };
        d.max(0.0)
    }
}

/// Product of hinges; the empty product is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisTerm {
    pub factors: Vec<Hinge>,
}

impl BasisTerm {
    #[inline]
    fn eval(&self, row: &[f64]) -> f64 {
        self.factors.iter().map(|h| h.eval(row)).product()
    }

    fn uses(&self, var: usize) -> bool {
        self.factors.iter().any(|h| h.var == var)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarsModel {
    pub task: Task,
    pub terms: Vec<BasisTerm>,
    pub coef: Vec<f64>,
}

/// Ridge penalty of the logistic refit for binary targets; keeps small or
/// separable training sets away from 0/1 probabilities.
const LOGIT_PENALTY: f64 = 1.0;

impl MarsModel {
    fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.terms.iter().zip(&self.coef).map(|(t, c)| c * t.eval(row)).sum()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows_iter()
            .map(|r| {
                let z = self.linear_predictor(r);
                match self.task {
                    Task::Regression => z,
                    Task::Binary => sigmoid(z),
                }
            })
            .collect()
    }

    pub fn fit(spec: &LearnerSpec, x: &Matrix, y: &[f64], task: Task) -> Result<Self> {
        let n = x.nrows();
        let max_terms = spec.max_terms.unwrap_or_else(|| (n / 5).min(20)).max(1);
        let (terms, columns) = forward_pass(spec, x, y, max_terms);
        let penalty = if spec.mars_degree > 1 { 3.0 } else { 2.0 };
        let keep = backward_prune(&columns, y, penalty);
        let terms: Vec<BasisTerm> = keep.iter().map(|&i| terms[i].clone()).collect();
        let columns: Vec<Vec<f64>> = keep.iter().map(|&i| columns[i].clone()).collect();
        let ls_coef = least_squares(&columns, y)?;

        let coef = match task {
            Task::Regression => ls_coef,
            Task::Binary if columns.len() > 1 => {
                // columns[0] is the intercept; logistic_fit adds its own
                let rows: Vec<Vec<f64>> = (0..n).map(|i| columns[1..].iter().map(|c| c[i]).collect()).collect();
                let design = Matrix::from_rows(&rows)?;
                match logistic_fit(&design, y, LOGIT_PENALTY, 100) {
                    Ok(fit) => std::iter::once(fit.model.intercept).chain(fit.model.coef).collect(),
                    Err(_) => return Ok(Self::linear_probability(terms, ls_coef)),
                }
            }
            Task::Binary => {
                let q = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
                vec![(q / (1.0 - q)).ln()]
            }
        };
        Ok(Self { task, terms, coef })
    }

    /// Fallback for binary targets when the logistic refit fails: the least
    /// squares fit on the 0/1 target, reported on the regression scale and
    /// clipped downstream.
    fn linear_probability(terms: Vec<BasisTerm>, coef: Vec<f64>) -> Self {
        Self { task: Task::Regression, terms, coef }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the components of `v` along the orthonormal columns `q`.
fn orthogonalize(v: &mut [f64], q: &[Vec<f64>]) {
    for qc in q {
        let c = dot(v, qc);
        v.iter_mut().zip(qc).for_each(|(a, b)| *a -= c * b);
    }
}

/// Observations kept clear of knots at each end of a variable's range, so a
/// hinge never rests on a handful of extreme points: `3 + log2(20 p)`.
fn end_span(p: usize) -> usize {
    (3.0 + (20.0 * p.max(1) as f64).log2()).ceil() as usize
}

/// Candidate knots for `var` among rows where `parent` is non-zero: the
/// distinct values left after trimming `end_span` observations from each
/// end, thinned to at most `max_knots` quantiles.
fn candidate_knots(x: &Matrix, var: usize, parent: &[f64], max_knots: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = (0..x.nrows()).filter(|&i| parent[i] != 0.0).map(|i| x.get(i, var)).collect();
    sorted.sort_by(f64::total_cmp);
    let span = end_span(x.ncols());
    if sorted.len() <= 2 * span {
        return Vec::new();
    }
    let mut vals = sorted[span..sorted.len() - span].to_vec();
    vals.dedup();
    // a knot at the maximum would give an all-zero hinge
    if vals.last() == sorted.last() {
        vals.pop();
    }
    if vals.len() <= max_knots {
        return vals;
    }
    let step = (vals.len() - 1) as f64 / (max_knots - 1).max(1) as f64;
    let mut out: Vec<f64> = (0..max_knots).map(|k| vals[(k as f64 * step).round() as usize]).collect();
    out.dedup();
    out
}

struct Candidate {
    reduction: f64,
    factors: Vec<Vec<Hinge>>,
    columns: Vec<Vec<f64>>,
}

fn forward_pass(spec: &LearnerSpec, x: &Matrix, y: &[f64], max_terms: usize) -> (Vec<BasisTerm>, Vec<Vec<f64>>) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut terms = vec![BasisTerm { factors: Vec::new() }];
    let mut columns = vec![vec![1.0; n]];
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut q: Vec<Vec<f64>> = vec![vec![inv_sqrt_n; n]];
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut resid: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let tss: f64 = resid.iter().map(|r| r * r).sum();

    while terms.len() < max_terms {
        let slots = max_terms - terms.len();
        let mut best: Option<Candidate> = None;
        for parent_idx in 0..terms.len() {
            let parent = &terms[parent_idx];
            if parent.factors.len() >= spec.mars_degree {
                continue;
            }
            let parent_col = &columns[parent_idx];
            for var in 0..p {
                if parent.uses(var) {
                    continue;
                }
                for knot in candidate_knots(x, var, parent_col, spec.max_knots) {
                    let hinges = [Hinge { var, knot, sign: 1 }, Hinge { var, knot, sign: -1 }];
                    let raw: Vec<Vec<f64>> = hinges
                        .iter()
                        .map(|h| (0..n).map(|i| parent_col[i] * h.eval(x.row(i))).collect())
                        .collect();
                    // score each hinge alone and, when room allows, the pair
                    let options: Vec<Vec<usize>> =
                        if slots >= 2 { vec![vec![0, 1]] } else { vec![vec![0], vec![1]] };
                    for opt in options {
                        let mut basis: Vec<Vec<f64>> = Vec::new();
                        let mut kept = Vec::new();
                        let mut reduction = 0.0;
                        for &o in &opt {
                            let mut v = raw[o].clone();
                            let norm0 = dot(&v, &v);
                            if norm0 <= 0.0 {
                                continue;
                            }
                            orthogonalize(&mut v, &q);
                            orthogonalize(&mut v, &basis);
                            let norm = dot(&v, &v);
                            if norm <= ORTHO_TOL * norm0 {
                                continue;
                            }
                            let inv = 1.0 / norm.sqrt();
                            v.iter_mut().for_each(|a| *a *= inv);
                            let c = dot(&v, &resid);
                            reduction += c * c;
                            basis.push(v);
                            kept.push(o);
                        }
                        if kept.is_empty() {
                            continue;
                        }
                        if best.as_ref().is_none_or(|b| reduction > b.reduction) {
                            let mut factors_list = Vec::new();
                            let mut cols = Vec::new();
                            for &o in &kept {
                                let mut f = parent.factors.clone();
                                f.push(hinges[o]);
                                factors_list.push(f);
                                cols.push(raw[o].clone());
                            }
                            best = Some(Candidate { reduction, factors: factors_list, columns: cols });
                        }
                    }
                }
            }
        }
        let Some(cand) = best else { break };
        if cand.reduction <= 1e-9 * tss.max(f64::MIN_POSITIVE) {
            break;
        }
        for (factors, col) in cand.factors.into_iter().zip(cand.columns) {
            let mut v = col.clone();
            orthogonalize(&mut v, &q);
            let norm = dot(&v, &v).sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
                let c = dot(&v, &resid);
                resid.iter_mut().zip(&v).for_each(|(r, b)| *r -= c * b);
                q.push(v);
            }
            terms.push(BasisTerm { factors });
            columns.push(col);
        }
    }
    (terms, columns)
}

/// Residual sum of squares of the least-squares fit on a subset of columns,
/// from precomputed cross products.
fn subset_rss(gram: &DMatrix<f64>, xty: &DVector<f64>, yty: f64, subset: &[usize]) -> f64 {
    let k = subset.len();
    let mut g = DMatrix::from_fn(k, k, |a, b| gram[(subset[a], subset[b])]);
    let trace: f64 = (0..k).map(|a| g[(a, a)]).sum();
    for a in 0..k {
        g[(a, a)] += 1e-10 * trace / k as f64;
    }
    let c = DVector::from_fn(k, |a, _| xty[subset[a]]);
    match solve_symmetric(g, c.clone()) {
        Ok(beta) => (yty - c.dot(&beta)).max(0.0),
        Err(_) => f64::INFINITY,
    }
}

fn gcv(rss: f64, n: usize, terms: usize, penalty: f64) -> f64 {
    let n = n as f64;
    let effective = terms as f64 + penalty * (terms as f64 - 1.0) / 2.0;
    if effective >= n {
        return f64::INFINITY;
    }
    let denom = 1.0 - effective / n;
    (rss / n) / (denom * denom)
}

/// Backward elimination by GCV. Returns indices of the kept columns; the
/// intercept (column 0) is never removed.
fn backward_prune(columns: &[Vec<f64>], y: &[f64], penalty: f64) -> Vec<usize> {
    let m = columns.len();
    let n = y.len();
    let gram = DMatrix::from_fn(m, m, |a, b| dot(&columns[a], &columns[b]));
    let xty = DVector::from_fn(m, |a, _| dot(&columns[a], y));
    let yty = dot(y, y);

    let mut current: Vec<usize> = (0..m).collect();
    let mut best_subset = current.clone();
    let mut best_gcv = gcv(subset_rss(&gram, &xty, yty, &current), n, m, penalty);
    while current.len() > 1 {
        let mut step_best: Option<(f64, usize)> = None;
        for pos in 1..current.len() {
            let mut trial = current.clone();
            trial.remove(pos);
            let rss = subset_rss(&gram, &xty, yty, &trial);
            if step_best.is_none_or(|(r, _)| rss < r) {
                step_best = Some((rss, pos));
            }
        }
        let (rss, pos) = step_best.expect("at least one removable term");
        current.remove(pos);
        let score = gcv(rss, n, current.len(), penalty);
        if score <= best_gcv {
            best_gcv = score;
            best_subset = current.clone();
        }
    }
    best_subset
}

fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = columns.len();
    let mut gram = DMatrix::from_fn(m, m, |a, b| dot(&columns[a], &columns[b]));
    let trace: f64 = (0..m).map(|a| gram[(a, a)]).sum();
    for a in 0..m {
        gram[(a, a)] += 1e-10 * trace / m as f64;
    }
    let xty = DVector::from_fn(m, |a, _| dot(&columns[a], y));
    Ok(solve_symmetric(gram, xty)?.iter().copied().collect())
}
