//! Monte Carlo runs: every `(scheme, size, replicate)` task derives its own
//! seeds, so the results do not depend on scheduling or worker count.
//!
//! Replicates of one `(size, replicate)` pair share the same dataset across
//! schemes (common random numbers); only the split seed depends on the scheme.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SchemeSpec};
use crate::dgp::{oracle_scores, DgpSpec, SizeSpec};
use crate::error::{Error, Result};
use crate::estimators::{crossfit_with_models, score_rows, Estimand, VarianceMethod};
use crate::diagnostics::default_n_oracle;
use crate::parallel::map_ordered;
use crate::rng::derive_seed;

pub const RESULT_COLUMNS: [&str; 13] = [
    "experiment",
    "dgp",
    "scheme",
    "n",
    "replicate",
    "estimate",
    "se",
    "ci_low",
    "ci_high",
    "covered",
    "ep",
    "runtime_ms",
    "error",
];

const DATA_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const ORACLE_STREAM: u64 = 2;

/// Seed of the dataset for `(size, replicate)`.
pub fn data_seed(master: u64, size_index: usize, replicate: usize) -> u64 {
    derive_seed(master, &[DATA_STREAM, size_index as u64, replicate as u64])
}

/// Seed of the split for `(scheme, size, replicate)`.
pub fn split_seed(master: u64, scheme_index: usize, size_index: usize, replicate: usize) -> u64 {
    derive_seed(master, &[SPLIT_STREAM, scheme_index as u64, size_index as u64, replicate as u64])
}

fn oracle_seed(master: u64, scheme_index: usize, size_index: usize, replicate: usize) -> u64 {
    derive_seed(master, &[ORACLE_STREAM, scheme_index as u64, size_index as u64, replicate as u64])
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub dgp: String,
    pub scheme: String,
    pub n: usize,
    pub replicate: usize,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub covered: Option<bool>,
    pub ep: Option<f64>,
    pub runtime_ms: Option<u64>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Sidecar describing a results file; `summarize` reads the true value from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub experiment: String,
    pub dgp: DgpSpec,
    pub estimand: Estimand,
    pub true_psi: f64,
    pub variance: VarianceMethod,
    pub sizes: Vec<SizeSpec>,
    pub schemes: Vec<SchemeSpec>,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub meta: RunMeta,
}

struct Outcome {
    estimate: f64,
    se: f64,
    ci_low: f64,
    ci_high: f64,
    ep: Option<f64>,
}

fn replicate(cfg: &ExperimentConfig, scheme_index: usize, size_index: usize, rep: usize) -> Result<Outcome> {
    let scheme = &cfg.schemes[scheme_index];
    let size = cfg.sizes[size_index];
    let data = cfg.dgp.generate(size, data_seed(cfg.seed, size_index, rep))?;
    let plan = scheme.plan(&data.structure, split_seed(cfg.seed, scheme_index, size_index, rep))?;
    let out = crossfit_with_models(
        &data.table,
        &data.structure,
        &plan,
        &cfg.strategy(),
        cfg.estimand,
        cfg.variance_method(),
    )?;
    let ep = if cfg.compute_ep {
        let n = data.table.n();
        let oracle = oracle_scores(&cfg.dgp, &data.table, cfg.estimand)?;
        let in_sample = out.scores.values.iter().zip(&oracle).map(|(f, o)| f - o).sum::<f64>() / n as f64;
        let count = cfg.n_oracle.unwrap_or_else(|| default_n_oracle(n));
        let sample = cfg.dgp.marginal_sample(size, count, oracle_seed(cfg.seed, scheme_index, size_index, rep))?;
        let rows: Vec<usize> = (0..sample.n()).collect();
        let sample_oracle = oracle_scores(&cfg.dgp, &sample, cfg.estimand)?;
        let mut population = 0.0;
        for (fold, model) in plan.folds.iter().zip(&out.models) {
            let fitted = score_rows(&sample, &rows, model.as_ref(), cfg.estimand)?.scores;
            let mu = fitted.iter().zip(&sample_oracle).map(|(f, o)| f - o).sum::<f64>() / count as f64;
            population += fold.eval.len() as f64 / n as f64 * mu;
        }
        Some(in_sample - population)
    } else {
        None
    };
    let r = out.result;
    Ok(Outcome { estimate: r.estimate, se: r.se, ci_low: r.ci_low, ci_high: r.ci_high, ep })
}

fn error_text(e: &Error) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

/// Runs every `(scheme, size, replicate)` task. `workers` overrides the
/// config's worker count when given.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    let true_psi = cfg.dgp.true_psi(cfg.estimand)?;
    let (n_schemes, n_sizes, r) = (cfg.schemes.len(), cfg.sizes.len(), cfg.replicates);
    let rows = map_ordered(workers.unwrap_or(cfg.workers), n_schemes * n_sizes * r, |task| {
        let scheme_index = task / (n_sizes * r);
        let size_index = (task / r) % n_sizes;
        let rep = task % r;
        let start = cfg.record_timing.then(Instant::now);
        let outcome = replicate(cfg, scheme_index, size_index, rep);
        let runtime_ms = start.map(|s| s.elapsed().as_millis() as u64);
        let mut row = ResultRow {
            experiment: cfg.name.clone(),
            dgp: cfg.dgp.tag().into(),
            scheme: cfg.schemes[scheme_index].scheme().as_str().into(),
            n: cfg.dgp.units(cfg.sizes[size_index]),
            replicate: rep,
            estimate: None,
            se: None,
            ci_low: None,
            ci_high: None,
            covered: None,
            ep: None,
            runtime_ms,
            error: None,
        };
        match outcome {
            Ok(o) => {
                row.estimate = Some(o.estimate);
                row.se = Some(o.se);
                row.ci_low = Some(o.ci_low);
                row.ci_high = Some(o.ci_high);
                row.covered = Some(o.ci_low <= true_psi && true_psi <= o.ci_high);
                row.ep = o.ep;
            }
            Err(e) => row.error = Some(error_text(&e)),
        }
        row
    });
    let meta = RunMeta {
        experiment: cfg.name.clone(),
        dgp: cfg.dgp.clone(),
        estimand: cfg.estimand,
        true_psi,
        variance: cfg.variance_method(),
        sizes: cfg.sizes.clone(),
        schemes: cfg.schemes.clone(),
        replicates: cfg.replicates,
        seed: cfg.seed,
    };
    Ok(RunOutput { rows, meta })
}

pub fn write_results<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(RESULT_COLUMNS)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(Error::InvalidInput(format!("{}: unexpected results header {header:?}", path.display())));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Sidecar path for a results file: `x.csv` becomes `x.meta.json`.
pub fn meta_path(results: &Path) -> PathBuf {
    results.with_extension("meta.json")
}

/// Writes `<output_dir>/<name>_results.csv` and its sidecar; returns the CSV path.
pub fn write_run(out: &RunOutput, output_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(output_dir)?;
    let path = output_dir.join(format!("{}_results.csv", out.meta.experiment));
    write_results(&out.rows, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    std::fs::write(meta_path(&path), serde_json::to_string_pretty(&out.meta)?)?;
    Ok(path)
}
