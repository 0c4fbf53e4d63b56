//! Empirical-process diagnostics.
//!
//! For a single split `(S1, S2)` the empirical-process term of the fitted
//! score is `(P_{S2} - P)(f_hat - f_0)`. The population mean `P(f_hat - f_0)`
//! is approximated on a fresh marginal sample from the DGP. [`ep_suite`]
//! repeats this over sizes and replicates and summarizes the mean (which
//! should be zero) and the variance scaling.

use std::io::Write;

use serde::Serialize;

use crate::data::ObservationTable;
use crate::dependence::DependenceStructure;
use crate::dgp::{oracle_scores, DgpSpec, SizeSpec};
use crate::error::{Error, Result};
use crate::estimators::{score_rows, Estimand, NuisanceModel, NuisanceStrategy};
use crate::parallel::map_ordered;
use crate::rng::derive_seed;
use crate::splitters::as_independent_split;

/// Reference scaling for reported `r_n * EP` values.
pub const RN_CONVENTION: &str = "sqrt_n";

/// Default oracle sample size `max(1e5, 20 n)`.
pub fn default_n_oracle(n: usize) -> usize {
    (20 * n).max(100_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpValue {
    /// `(P_{S2} - P)(f_hat - f_0)`.
    pub ep: f64,
    /// `(P_{S2} - P)(f_0 - f_hat)`, the opposite sign convention.
    pub ep_reversed: f64,
}

/// EP from scores on `S2` and the oracle-sample mean `mu_delta` of
/// `f_hat - f_0`.
pub fn ep_term(fitted: &[f64], oracle: &[f64], mu_delta: f64, n_oracle: usize) -> Result<EpValue> {
    if fitted.len() != oracle.len() {
        return Err(Error::SizeMismatch { expected: fitted.len(), found: oracle.len() });
    }
    if fitted.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    if n_oracle < 10 * fitted.len() {
        return Err(Error::InvalidInput(format!(
            "oracle sample of {n_oracle} is smaller than 10 x {} evaluation units",
            fitted.len()
        )));
    }
    let mean_delta = fitted.iter().zip(oracle).map(|(f, o)| f - o).sum::<f64>() / fitted.len() as f64;
    let ep = mean_delta - mu_delta;
    Ok(EpValue { ep, ep_reversed: -ep })
}

/// `(2 * pairs + n) / n^2 * v`: the variance of a mean of `n` scores with
/// per-unit variance at most `v` when only `pairs` pairs may covary.
pub fn variance_bound(structure: &DependenceStructure, n: usize, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::InvalidInput(format!("score variance bound {v} must be non-negative")));
    }
    let pairs = structure.correlated_pairs(n)?;
    Ok(pair_bound(pairs, n, v))
}

fn pair_bound(pairs: usize, n: usize, v: f64) -> f64 {
    (2.0 * pairs as f64 + n as f64) / (n as f64 * n as f64) * v
}

/// Correlated pairs among the units `idx`.
pub fn pairs_within(structure: &DependenceStructure, idx: &[usize]) -> Result<usize> {
    let mut member = vec![false; structure.n()];
    for &i in idx {
        *member.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, len: structure.n() })? = true;
    }
    let mut pairs = 0;
    for &i in idx {
        pairs += structure.neighbors(i)?.into_iter().filter(|&j| j > i && member[j]).count();
    }
    Ok(pairs)
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

#[derive(Debug, Clone)]
pub struct EpSuiteParams {
    pub dgp: DgpSpec,
    pub sizes: Vec<SizeSpec>,
    pub replicates: usize,
    pub strategy: NuisanceStrategy,
    pub estimand: Estimand,
    /// Oracle sample size; `None` uses [`default_n_oracle`].
    pub n_oracle: Option<usize>,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpRecord {
    pub size: SizeSpec,
    pub n: usize,
    pub replicate: usize,
    pub ep: f64,
    pub ep_reversed: f64,
    pub ep_scaled: f64,
    pub n_oracle: usize,
    pub n_eval: usize,
    /// Sample variance of `f_hat - f_0` over the evaluation units.
    pub delta_variance: f64,
    /// Correlated pairs inside the evaluation set.
    pub eval_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpSizeSummary {
    pub size: SizeSpec,
    pub n: usize,
    pub replicates: usize,
    pub mean: f64,
    pub se_mean: f64,
    pub variance: f64,
    /// `Var(sqrt(n) * EP)`.
    pub variance_scaled: f64,
    /// Correlated pairs in the full dataset, averaged over replicates.
    pub mean_pairs: f64,
    pub mean_eval_pairs: f64,
    pub max_delta_variance: f64,
    /// [`variance_bound`] on the evaluation set with the largest observed
    /// per-unit variance.
    pub variance_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpReport {
    pub dgp: DgpSpec,
    pub estimand: Estimand,
    pub rn_convention: &'static str,
    pub sizes: Vec<EpSizeSummary>,
    /// Least-squares slope of `log Var(EP)` on `log n`; needs at least three
    /// sizes with positive variance.
    pub slope: Option<f64>,
    pub slope_defined: bool,
    /// Adjacent increases of `Var(sqrt(n) * EP)` across sizes.
    pub scaled_inversions: usize,
    pub records: Vec<EpRecord>,
}

impl EpReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-replicate CSV: `size, replicate, ep, ep_scaled, n_oracle`.
    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["size", "replicate", "ep", "ep_scaled", "n_oracle"])?;
        for r in &self.records {
            out.write_record([
                r.size.label(),
                r.replicate.to_string(),
                r.ep.to_string(),
                r.ep_scaled.to_string(),
                r.n_oracle.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Mean of `f_hat - f_0` over an oracle sample.
pub fn oracle_mean_delta(
    dgp: &DgpSpec,
    sample: &ObservationTable,
    fitted: &dyn NuisanceModel,
    estimand: Estimand,
) -> Result<f64> {
    let rows: Vec<usize> = (0..sample.n()).collect();
    let f_hat = score_rows(sample, &rows, fitted, estimand)?.scores;
    let f_0 = oracle_scores(dgp, sample, estimand)?;
    Ok(f_hat.iter().zip(&f_0).map(|(a, b)| a - b).sum::<f64>() / rows.len() as f64)
}

/// One replicate: generate, split in two, fit on `S1`, EP on `S2`.
pub fn ep_replicate(params: &EpSuiteParams, size_index: usize, replicate: usize) -> Result<(EpRecord, usize)> {
    let size = params.sizes[size_index];
    let path = |stream: u64| derive_seed(params.seed, &[size_index as u64, replicate as u64, stream]);
    let data = params.dgp.generate(size, path(0))?;
    let n = data.table.n();
    let plan = as_independent_split(n, 2, path(1))?;
    let fold = &plan.folds[0];
    let model = params.strategy.train(&data.table, &fold.train)?;
    let fitted = score_rows(&data.table, &fold.eval, model.as_ref(), params.estimand)?.scores;
    let eval_table = data.table.select(&fold.eval)?;
    let oracle = oracle_scores(&params.dgp, &eval_table, params.estimand)?;
    let n_oracle = params.n_oracle.unwrap_or_else(|| default_n_oracle(n));
    let sample = params.dgp.marginal_sample(size, n_oracle, path(2))?;
    let mu_delta = oracle_mean_delta(&params.dgp, &sample, model.as_ref(), params.estimand)?;
    let value = ep_term(&fitted, &oracle, mu_delta, n_oracle)?;
    let delta: Vec<f64> = fitted.iter().zip(&oracle).map(|(a, b)| a - b).collect();
    let record = EpRecord {
        size,
        n,
        replicate,
        ep: value.ep,
        ep_reversed: value.ep_reversed,
        ep_scaled: (n as f64).sqrt() * value.ep,
        n_oracle,
        n_eval: fold.eval.len(),
        delta_variance: sample_variance(&delta),
        eval_pairs: pairs_within(&data.structure, &fold.eval)?,
    };
    Ok((record, data.structure.correlated_pairs(n)?))
}

pub fn ep_suite(params: &EpSuiteParams) -> Result<EpReport> {
    if params.sizes.is_empty() {
        return Err(Error::InvalidInput("no sizes".into()));
    }
    if params.replicates < 100 {
        return Err(Error::InvalidInput(format!("EP diagnostics need at least 100 replicates, got {}", params.replicates)));
    }
    let units: Vec<usize> = params.sizes.iter().map(|&s| params.dgp.units(s)).collect();
    if units.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sizes must be increasing".into()));
    }
    params.dgp.true_psi(params.estimand)?;

    let r = params.replicates;
    let results = map_ordered(params.workers, params.sizes.len() * r, |task| {
        let (s, rep) = (task / r, task % r);
        ep_replicate(params, s, rep).map_err(|e| Error::Replicate { size: units[s], replicate: rep, source: Box::new(e) })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::with_capacity(params.sizes.len());
    for (s, &size) in params.sizes.iter().enumerate() {
        let chunk = &results[s * r..(s + 1) * r];
        let eps: Vec<f64> = chunk.iter().map(|(rec, _)| rec.ep).collect();
        let scaled: Vec<f64> = chunk.iter().map(|(rec, _)| rec.ep_scaled).collect();
        let variance = sample_variance(&eps);
        let mean_eval_pairs = chunk.iter().map(|(rec, _)| rec.eval_pairs as f64).sum::<f64>() / r as f64;
        let max_delta_variance = chunk.iter().map(|(rec, _)| rec.delta_variance).fold(0.0, f64::max);
        let n_eval = chunk[0].0.n_eval;
        let max_eval_pairs = chunk.iter().map(|(rec, _)| rec.eval_pairs).max().unwrap_or(0);
        summaries.push(EpSizeSummary {
            size,
            n: chunk[0].0.n,
            replicates: r,
            mean: eps.iter().sum::<f64>() / r as f64,
            se_mean: (variance / r as f64).sqrt(),
            variance,
            variance_scaled: sample_variance(&scaled),
            mean_pairs: chunk.iter().map(|(_, p)| *p as f64).sum::<f64>() / r as f64,
            mean_eval_pairs,
            max_delta_variance,
            variance_bound: pair_bound(max_eval_pairs, n_eval, max_delta_variance),
        });
    }

    let usable: Vec<(f64, f64)> = summaries
        .iter()
        .filter(|s| s.variance > 0.0)
        .map(|s| ((s.n as f64).ln(), s.variance.ln()))
        .collect();
    let slope = (usable.len() >= 3 && usable.len() == summaries.len()).then(|| least_squares_slope(&usable));
    let scaled_inversions = summaries.windows(2).filter(|w| w[1].variance_scaled > w[0].variance_scaled).count();
    Ok(EpReport {
        dgp: params.dgp.clone(),
        estimand: params.estimand,
        rn_convention: RN_CONVENTION,
        sizes: summaries,
        slope_defined: slope.is_some(),
        slope,
        scaled_inversions,
        records: results.into_iter().map(|(rec, _)| rec).collect(),
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
