//! Per `(scheme, n)` operating characteristics of a results file.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::ResultRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub dgp: String,
    pub scheme: String,
    pub n: usize,
    pub replicates: usize,
    pub n_failed: usize,
    pub true_psi: f64,
    pub mean_estimate: Option<f64>,
    pub bias: Option<f64>,
    pub sd: Option<f64>,
    pub rmse: Option<f64>,
    pub mean_se: Option<f64>,
    pub coverage: Option<f64>,
    pub ep_mean: Option<f64>,
    pub ep_variance: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sample_sd(v: &[f64]) -> Option<f64> {
    sample_variance(v).map(f64::sqrt)
}

fn sample_variance(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    (v.len() >= 2).then(|| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64)
}

/// Groups rows by `(scheme, n)` in order of first appearance.
pub fn summarize(rows: &[ResultRow], true_psi: f64) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("results contain no rows".into()));
    }
    if !true_psi.is_finite() {
        return Err(Error::NonFinite("true value".into()));
    }
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        let key = (r.scheme.as_str(), r.n);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::with_capacity(keys.len());
    for (scheme, n) in keys {
        let group: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == scheme && r.n == n).collect();
        let ok: Vec<&&ResultRow> = group.iter().filter(|r| !r.failed() && r.estimate.is_some()).collect();
        let est: Vec<f64> = ok.iter().filter_map(|r| r.estimate).collect();
        let se: Vec<f64> = ok.iter().filter_map(|r| r.se).collect();
        let covered: Vec<f64> = ok.iter().filter_map(|r| r.covered).map(|c| f64::from(u8::from(c))).collect();
        let ep: Vec<f64> = ok.iter().filter_map(|r| r.ep).collect();
        let sq: Vec<f64> = est.iter().map(|e| (e - true_psi) * (e - true_psi)).collect();
        let first = group[0];
        out.push(SummaryRow {
            experiment: first.experiment.clone(),
            dgp: first.dgp.clone(),
            scheme: scheme.to_string(),
            n,
            replicates: est.len(),
            n_failed: group.len() - est.len(),
            true_psi,
            mean_estimate: mean(&est),
            bias: mean(&est).map(|m| m - true_psi),
            sd: sample_sd(&est),
            rmse: mean(&sq).map(f64::sqrt),
            mean_se: mean(&se),
            coverage: mean(&covered),
            ep_mean: mean(&ep),
            ep_variance: sample_variance(&ep),
        });
    }
    Ok(out)
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
