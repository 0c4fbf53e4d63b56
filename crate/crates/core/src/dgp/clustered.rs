//! Two-way clustered data: an `N x M` grid of cells with row and column
//! random effects entering the covariates, treatment and outcome.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::quadrature::standard_normal_rule;
use crate::data::ObservationTable;
use crate::dependence::DependenceStructure;
use crate::error::{Error, Result};
use crate::learners::sigmoid;
use crate::matrix::Matrix;
use crate::rng::SimRng;

pub const COVARIATES: [&str; 5] = ["L1", "L2", "L3", "L4", "L5"];

/// `1 + 0.3 E[L3 L4]` with `E[L3 L4] = 0.3 E[L2^2 1{L1 > 0}] = 0.15`.
pub const TRUE_ATE: f64 = 1.045;

const QUADRATURE_ORDER: usize = 20;

/// `E m(0, L) = 0.3 E[L3^2]`, where `L1 ~ N(0, 3)` marginally so that
/// `E sin^2 L1 = (1 - e^-6) / 2`.
pub fn true_control_mean() -> f64 {
    0.3 * (0.5 + (1.0 - (-6.0f64).exp()) / 2.0 + 0.09)
}

/// Latent effects for one cell: `(L, A, Y, tau)` channels of its row and column.
#[derive(Debug, Clone, Copy)]
struct Effects {
    row: [f64; 4],
    col: [f64; 4],
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_effects(rng: &mut SimRng) -> [f64; 4] {
    [normal(rng), normal(rng), normal(rng), normal(rng)]
}

fn propensity_index(l: &[f64]) -> f64 {
    -0.4 + 0.8 * l[0] - 0.7 * l[1] * l[1] + 0.5 * l[2].sin() + 0.4 * l[0] * l[1] - 0.5 * l[3] * l[4]
}

fn control_mean(l: &[f64]) -> f64 {
    0.5 * l[0] - 0.4 * l[1] + 0.3 * l[2] * l[2] - 0.5 * l[3].sin() + 0.4 * l[0] * l[1]
}

/// Effect of treatment given covariates, averaged over the latent effects.
fn treatment_effect(l: &[f64]) -> f64 {
    1.0 + 0.5 * l[0].sin() - 0.5 * l[1].sin() + 0.3 * l[2] * l[3]
}

fn draw_cell(rng: &mut SimRng, e: &Effects) -> ([f64; 5], u8, f64) {
    let l1 = e.row[0] + e.col[0] + normal(rng);
    let l2 = normal(rng);
    let l3 = l1.sin() + 0.3 * l2 + 0.5f64.sqrt() * normal(rng);
    let l4 = if l1 > 0.0 { l2 } else { 0.0 } + 0.5f64.sqrt() * normal(rng);
    let l5 = 1.0 + 2.0f64.sqrt() * normal(rng);
    let l = [l1, l2, l3, l4, l5];
    let eta = propensity_index(&l) + 0.6 * e.row[1] - 0.6 * e.col[1];
    let a = u8::from(rng.random::<f64>() < sigmoid(eta / 5.0));
    let af = f64::from(a);
    let mean = control_mean(&l)
        + 0.6 * e.row[2]
        + 0.6 * e.col[2]
        + af * (treatment_effect(&l) + 0.4 * e.row[3] * e.col[3]);
    (l, a, mean + normal(rng))
}

fn assemble(cells: Vec<([f64; 5], u8, f64)>, ids: Vec<String>) -> Result<ObservationTable> {
    let n = cells.len();
    let mut data = Vec::with_capacity(n * 5);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (l, ai, yi) in cells {
        data.extend_from_slice(&l);
        a.push(ai);
        y.push(yi);
    }
    ObservationTable::new(COVARIATES.iter().map(|s| s.to_string()).collect(), Matrix::new(n, 5, data)?, a, y, ids)
}

/// Grid of `rows x cols` cells in row-major order.
pub fn generate(rows: usize, cols: usize, rng: &mut SimRng) -> Result<(ObservationTable, DependenceStructure)> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidInput(format!("clustered grid needs at least 2 rows and 2 columns, got {rows}x{cols}")));
    }
    let row_effects: Vec<[f64; 4]> = (0..rows).map(|_| draw_effects(rng)).collect();
    let col_effects: Vec<[f64; 4]> = (0..cols).map(|_| draw_effects(rng)).collect();
    let mut cells = Vec::with_capacity(rows * cols);
    let mut ids = Vec::with_capacity(rows * cols);
    let mut row_ids = Vec::with_capacity(rows * cols);
    let mut col_ids = Vec::with_capacity(rows * cols);
    for (i, &row) in row_effects.iter().enumerate() {
        for (j, &col) in col_effects.iter().enumerate() {
            cells.push(draw_cell(rng, &Effects { row, col }));
            ids.push(format!("r{i}c{j}"));
            row_ids.push(i);
            col_ids.push(j);
        }
    }
    Ok((assemble(cells, ids)?, DependenceStructure::two_way(row_ids, col_ids)?))
}

/// Independent cells, each with its own fresh row and column effects.
pub fn marginal_sample(count: usize, rng: &mut SimRng) -> Result<ObservationTable> {
    let cells = (0..count)
        .map(|_| {
            let e = Effects { row: draw_effects(rng), col: draw_effects(rng) };
            draw_cell(rng, &e)
        })
        .collect();
    assemble(cells, (0..count).map(|i| i.to_string()).collect())
}

/// Monte Carlo draw of the conditional effect `m(1, L) - m(0, L)` including
/// the latent interaction, for one independent cell.
pub fn effect_draw(rng: &mut SimRng) -> f64 {
    let e = Effects { row: draw_effects(rng), col: draw_effects(rng) };
    let (l, _, _) = draw_cell(rng, &e);
    treatment_effect(&l) + 0.4 * e.row[3] * e.col[3]
}

/// True marginal nuisances. The propensity integrates the row and column
/// treatment effects out with a tensor Gauss–Hermite rule.
#[derive(Debug, Clone)]
pub struct ClusteredOracle {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for ClusteredOracle {
    fn default() -> Self {
        let (nodes, weights) = standard_normal_rule(QUADRATURE_ORDER);
        Self { nodes, weights }
    }
}

impl ClusteredOracle {
    pub fn outcome_row(&self, l: &[f64], a: u8) -> f64 {
        control_mean(l) + f64::from(a) * treatment_effect(l)
    }

    pub fn propensity_row(&self, l: &[f64]) -> f64 {
        let eta = propensity_index(l);
        let mut total = 0.0;
        for (&zg, &wg) in self.nodes.iter().zip(&self.weights) {
            for (&zn, &wn) in self.nodes.iter().zip(&self.weights) {
                total += wg * wn * sigmoid((eta + 0.6 * zg - 0.6 * zn) / 5.0);
            }
        }
        total
    }
}
