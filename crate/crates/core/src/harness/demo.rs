//! Cross-fit versus no-cross-fit estimates on the same datasets, summarized
//! as `sqrt(n) * |bias|` over the replicates.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::DemoConfig;
use super::plot::{Chart, Series};
use super::run::{data_seed, split_seed};
use crate::error::{Error, Result};
use crate::estimators::{crossfit_estimate, nocrossfit_estimate, EstimateResult};
use crate::parallel::map_ordered;
use crate::splitters::as_independent_split;

pub const CROSS_FIT: &str = "cross_fit";
pub const NO_CROSS_FIT: &str = "no_cross_fit";

/// One estimate; `correction` is the estimate minus its plug-in part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub method: String,
    pub n: usize,
    pub replicate: usize,
    pub estimate: Option<f64>,
    pub plug_in: Option<f64>,
    pub correction: Option<f64>,
    pub se: Option<f64>,
    pub covered: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub method: String,
    pub n: usize,
    pub replicates: usize,
    pub n_failed: usize,
    pub bias: Option<f64>,
    /// Monte Carlo standard error of `bias`.
    pub bias_se: Option<f64>,
    pub scaled_abs_bias: Option<f64>,
    pub sd: Option<f64>,
    pub coverage: Option<f64>,
    pub max_abs_correction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub name: String,
    pub true_psi: f64,
    pub rows: Vec<DemoRow>,
    pub summary: Vec<DemoSummary>,
}

impl DemoReport {
    pub fn summary_for(&self, method: &str, n: usize) -> Option<&DemoSummary> {
        self.summary.iter().find(|s| s.method == method && s.n == n)
    }

    pub fn chart(&self) -> Chart {
        let series = [CROSS_FIT, NO_CROSS_FIT]
            .iter()
            .map(|&m| Series {
                name: m.into(),
                points: self
                    .summary
                    .iter()
                    .filter(|s| s.method == m)
                    .filter_map(|s| s.scaled_abs_bias.map(|v| (s.n as f64, v)))
                    .collect(),
            })
            .collect();
        Chart {
            title: format!("{}: sqrt(n) |bias|", self.name),
            x_label: "n".into(),
            y_label: "sqrt(n) |bias|".into(),
            series,
            y_range: None,
            reference: Some(0.0),
        }
    }

    /// Writes `<name>_results.csv`, `<name>_summary.csv` and `<name>_bias.svg`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let results = dir.join(format!("{}_results.csv", self.name));
        write_csv(&self.rows, std::fs::File::create(&results)?)?;
        let summary = dir.join(format!("{}_summary.csv", self.name));
        write_csv(&self.summary, std::fs::File::create(&summary)?)?;
        let svg = dir.join(format!("{}_bias.svg", self.name));
        std::fs::write(&svg, self.chart().to_svg()?)?;
        Ok(vec![results, summary, svg])
    }
}

fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn to_row(method: &str, n: usize, replicate: usize, truth: f64, r: Result<EstimateResult>) -> DemoRow {
    let mut row = DemoRow {
        method: method.into(),
        n,
        replicate,
        estimate: None,
        plug_in: None,
        correction: None,
        se: None,
        covered: None,
        error: None,
    };
    match r {
        Ok(e) => {
            row.estimate = Some(e.estimate);
            row.plug_in = Some(e.plug_in);
            row.correction = Some(e.estimate - e.plug_in);
            row.se = Some(e.se);
            row.covered = Some(e.covers(truth));
        }
        Err(e) => row.error = Some(e.to_string().replace(['\n', '\r'], " ")),
    }
    row
}

fn summarize_demo(rows: &[DemoRow], truth: f64, sizes: &[usize]) -> Vec<DemoSummary> {
    let mut out = Vec::new();
    for method in [CROSS_FIT, NO_CROSS_FIT] {
        for &n in sizes {
            let group: Vec<&DemoRow> = rows.iter().filter(|r| r.method == method && r.n == n).collect();
            let est: Vec<f64> = group.iter().filter_map(|r| r.estimate).collect();
            let k = est.len() as f64;
            let mean = (k > 0.0).then(|| est.iter().sum::<f64>() / k);
            let sd = mean.filter(|_| k >= 2.0).map(|m| (est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
            let covered: Vec<f64> = group.iter().filter_map(|r| r.covered).map(|c| f64::from(u8::from(c))).collect();
            let bias = mean.map(|m| m - truth);
            out.push(DemoSummary {
                method: method.into(),
                n,
                replicates: est.len(),
                n_failed: group.len() - est.len(),
                bias,
                bias_se: sd.map(|s| s / k.sqrt()),
                scaled_abs_bias: bias.map(|b| (n as f64).sqrt() * b.abs()),
                sd,
                coverage: (!covered.is_empty()).then(|| covered.iter().sum::<f64>() / covered.len() as f64),
                max_abs_correction: group.iter().filter_map(|r| r.correction).map(f64::abs).reduce(f64::max),
            });
        }
    }
    out
}

/// Runs both estimators on every `(size, replicate)` dataset. Rows are ordered
/// by method, size and replicate.
pub fn demo_bias(cfg: &DemoConfig, workers: Option<usize>) -> Result<DemoReport> {
    cfg.validate()?;
    let truth = cfg.dgp.true_psi(cfg.estimand)?;
    let method = cfg.dgp.default_variance();
    let strategy = cfg.strategy();
    let r = cfg.replicates;
    let pairs = map_ordered(workers.unwrap_or(cfg.workers), cfg.sizes.len() * r, |task| {
        let (size_index, rep) = (task / r, task % r);
        let size = cfg.sizes[size_index];
        let n = cfg.dgp.units(size);
        let data = cfg.dgp.generate(size, data_seed(cfg.seed, size_index, rep));
        let (cf, ncf) = match data {
            Ok(d) => {
                let cf = as_independent_split(d.table.n(), cfg.k, split_seed(cfg.seed, 0, size_index, rep))
                    .and_then(|plan| crossfit_estimate(&d.table, &d.structure, &plan, &strategy, cfg.estimand, method))
                    .map(|x| x.0);
                let ncf = nocrossfit_estimate(&d.table, &d.structure, &strategy, cfg.estimand, method).map(|x| x.0);
                (cf, ncf)
            }
            Err(e) => {
                let text = e.to_string();
                (Err(Error::InvalidInput(text.clone())), Err(Error::InvalidInput(text)))
            }
        };
        (to_row(CROSS_FIT, n, rep, truth, cf), to_row(NO_CROSS_FIT, n, rep, truth, ncf))
    });
    let (cf, ncf): (Vec<DemoRow>, Vec<DemoRow>) = pairs.into_iter().unzip();
    let rows: Vec<DemoRow> = cf.into_iter().chain(ncf).collect();
    let sizes: Vec<usize> = cfg.sizes.iter().map(|&s| cfg.dgp.units(s)).collect();
    let summary = summarize_demo(&rows, truth, &sizes);
    Ok(DemoReport { name: cfg.name.clone(), true_psi: truth, rows, summary })
}
