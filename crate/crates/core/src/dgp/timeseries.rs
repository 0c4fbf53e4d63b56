//! An m-dependent treatment/outcome series. The analysis view has one row per
//! time point after the lag window, with the lagged covariates and treatments
//! as features.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::data::ObservationTable;
use crate::dependence::DependenceStructure;
use crate::error::{Error, Result};
use crate::learners::{build_lagged_features, lag_window, sigmoid};
use crate::matrix::Matrix;
use crate::rng::SimRng;

/// Per-time-point columns of the raw series that enter the lag features.
pub const SERIES_COLUMNS: [&str; 4] = ["L1", "L2", "L3", "A"];
const WIDTH: usize = SERIES_COLUMNS.len();

/// Time points simulated and discarded before a marginal sample.
const BURN_IN: usize = 100;

/// Lag weight `0.25 / d` for lag distance `d`.
fn lag_weight(d: usize) -> f64 {
    0.25 / d as f64
}

/// Stationary `E[X_t] = sum_d 0.25/d * E[2 L1 + L2 - L3]` with `E[2 L1 + L2 - L3] = 2.5`.
pub fn mean_x(m: usize) -> f64 {
    (1..=m).map(lag_weight).sum::<f64>() * 2.5
}

/// Lag window used for a series of length `t`: `ceil(t^(1/3))`, but never
/// shorter than the dependence order, so the true nuisances are functions of
/// the features.
pub fn analysis_window(t: usize, m: usize) -> usize {
    lag_window(t).max(m)
}

/// Raw series: columns `L1, L2, L3, A` and the outcome.
#[derive(Debug, Clone)]
pub struct Series {
    pub values: Matrix,
    pub outcome: Vec<f64>,
}

pub fn simulate_series(t: usize, m: usize, rng: &mut SimRng) -> Series {
    let beta = Beta::new(2.0, 2.0).expect("valid beta");
    let mut data = Vec::with_capacity(t * WIDTH);
    let mut outcome = Vec::with_capacity(t);
    for time in 0..t {
        let l1 = f64::from(u8::from(rng.random_bool(0.5)));
        let l2 = f64::from(rng.random_range(1u8..=3));
        let l3 = f64::from(u8::from(rng.random_bool(0.5)));
        let (a, y) = if time < m {
            let a = f64::from(u8::from(rng.random_bool(0.5)));
            (a, 4.0 * (beta.sample(rng) - 0.5))
        } else {
            let (x, sa) = history(&data, time, m);
            let a = f64::from(u8::from(rng.random::<f64>() < sigmoid((x + sa - 0.5) / m as f64)));
            (a, a + x + 0.3 + 20.0 * (beta.sample(rng) - 0.5))
        };
        data.extend_from_slice(&[l1, l2, l3, a]);
        outcome.push(y);
    }
    Series { values: Matrix::new(t, WIDTH, data).expect("series shape"), outcome }
}

/// `(X_t, sum of the last m treatments)` from the raw row-major series.
fn history(data: &[f64], time: usize, m: usize) -> (f64, f64) {
    let mut x = 0.0;
    let mut sa = 0.0;
    for d in 1..=m {
        let r = &data[(time - d) * WIDTH..(time - d + 1) * WIDTH];
        x += lag_weight(d) * (2.0 * r[0] + r[1] - r[2]);
        sa += r[3];
    }
    (x, sa)
}

/// `(X_t, sum of the last m treatments)` from a lag-major feature row.
pub fn history_from_features(row: &[f64], m: usize) -> (f64, f64) {
    let mut x = 0.0;
    let mut sa = 0.0;
    for d in 1..=m {
        let r = &row[(d - 1) * WIDTH..d * WIDTH];
        x += lag_weight(d) * (2.0 * r[0] + r[1] - r[2]);
        sa += r[3];
    }
    (x, sa)
}

fn feature_names(w: usize) -> Vec<String> {
    (1..=w).flat_map(|d| SERIES_COLUMNS.iter().map(move |c| format!("{c}_lag{d}"))).collect()
}

/// Analysis table for the series from time `skip` on.
fn analysis_table(series: &Series, w: usize, skip: usize) -> Result<ObservationTable> {
    let features = build_lagged_features(&series.values, w)?;
    let rows: Vec<usize> = (skip.saturating_sub(w)..features.nrows()).collect();
    let covariates = features.select_rows(&rows);
    let times: Vec<usize> = rows.iter().map(|r| r + w).collect();
    let a = times.iter().map(|&t| series.values.get(t, WIDTH - 1) as u8).collect();
    let y = times.iter().map(|&t| series.outcome[t]).collect();
    let ids = times.iter().map(|&t| format!("t{t}")).collect();
    ObservationTable::new(feature_names(w), covariates, a, y, ids)
}

pub fn generate(t: usize, m: usize, rng: &mut SimRng) -> Result<(ObservationTable, DependenceStructure)> {
    if m == 0 {
        return Err(Error::InvalidInput("dependence order m must be at least 1".into()));
    }
    if t <= 4 * m {
        return Err(Error::InvalidInput(format!("series length {t} must exceed 4m = {}", 4 * m)));
    }
    let w = analysis_window(t, m);
    let series = simulate_series(t, m, rng);
    let table = analysis_table(&series, w, w)?;
    let n = table.n();
    Ok((table, DependenceStructure::TimeSeries { n, m }))
}

/// `count` consecutive analysis rows from a fresh series past its burn-in,
/// with the lag window of a length-`t` analysis.
pub fn marginal_sample(t: usize, m: usize, count: usize, rng: &mut SimRng) -> Result<ObservationTable> {
    let w = analysis_window(t, m);
    let skip = BURN_IN.max(w);
    let series = simulate_series(skip + count, m, rng);
    analysis_table(&series, w, skip)
}
