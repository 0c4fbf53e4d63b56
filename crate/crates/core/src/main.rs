use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crossfit::data::StructureFile;
use crossfit::dgp::{DgpSpec, SizeSpec};
use crossfit::diagnostics::{ep_suite, EpSuiteParams};
use crossfit::harness::run::meta_path;
use crossfit::harness::{
    demo_bias, plot_summary, read_results, read_summary, run_experiment, summarize, write_run, write_summary,
    DemoConfig, EpConfig, ExperimentConfig, RunMeta,
};
use crossfit::{Error, Result};

#[derive(Parser)]
#[command(name = "crossfit", version, about = "Cross-fitting experiments for dependent data")]
struct Cli {
    /// Worker threads; 0 uses every core. Overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed. Overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpKind {
    Clustered,
    Network,
    Independent,
    TimeSeries,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one dataset and write its table, structure and oracle files.
    Simulate {
        #[arg(long, value_enum)]
        dgp: DgpKind,
        /// Units, or `RxC` for the clustered grid.
        #[arg(long)]
        size: String,
        /// Expected degree of the network graph.
        #[arg(long)]
        edge_constant: Option<f64>,
        /// Dependence order of the time series.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
        /// File name prefix; defaults to the DGP name.
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Run a Monte Carlo experiment and write its results CSV.
    Run {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Per (scheme, n) bias, SD, RMSE and coverage of a results CSV.
    Summarize {
        results: PathBuf,
        /// True value; read from the results' metadata file when omitted.
        #[arg(long)]
        psi_true: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One SVG per metric from a summary CSV.
    Plot {
        summary: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Empirical-process term diagnostics.
    DiagnoseEp {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Cross-fit versus no-cross-fit bias on the same datasets.
    DemoBias {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_size(text: &str) -> Result<SizeSpec> {
    let bad = || Error::InvalidInput(format!("size `{text}` is neither `N` nor `RxC`"));
    match text.split_once(['x', 'X']) {
        Some((r, c)) => Ok(SizeSpec::Grid([r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?])),
        None => Ok(SizeSpec::Units(text.trim().parse().map_err(|_| bad())?)),
    }
}

fn parent_or_here(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
}

fn simulate(kind: DgpKind, size: &str, edge_constant: Option<f64>, m: Option<usize>, out_dir: &Path, prefix: Option<String>, seed: u64) -> Result<()> {
    let dgp = match kind {
        DgpKind::Clustered => DgpSpec::Clustered,
        DgpKind::Network => DgpSpec::Network { edge_constant: edge_constant.unwrap_or(3.0) },
        DgpKind::Independent => DgpSpec::independent(),
        DgpKind::TimeSeries => DgpSpec::TimeSeries { m: m.unwrap_or(4) },
    };
    dgp.validate().map_err(|(field, msg)| Error::config(format!("dgp.{field}"), msg))?;
    let data = dgp.generate(parse_size(size)?, seed)?;
    std::fs::create_dir_all(out_dir)?;
    let prefix = prefix.unwrap_or_else(|| dgp.tag().to_string());
    let table = out_dir.join(format!("{prefix}_table.csv"));
    data.table.write_csv(File::create(&table)?)?;
    let structure = out_dir.join(format!("{prefix}_structure.json"));
    let sidecar = StructureFile::from_structure(&data.structure, data.table.unit_ids());
    std::fs::write(&structure, serde_json::to_string_pretty(&sidecar)?)?;
    let oracle = out_dir.join(format!("{prefix}_oracle.json"));
    std::fs::write(&oracle, serde_json::to_string_pretty(&data.oracle_file())?)?;
    for p in [table, structure, oracle] {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(config: &Path, out_dir: Option<PathBuf>, workers: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = run_experiment(&cfg, workers)?;
    let failed = out.rows.iter().filter(|r| r.failed()).count();
    let path = write_run(&out, &out_dir.unwrap_or_else(|| cfg.output_dir.clone()))?;
    println!("{}", path.display());
    if failed > 0 {
        eprintln!("{failed} of {} replicates failed; see the error column", out.rows.len());
    }
    Ok(())
}

fn summarize_cmd(results: &Path, psi_true: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    let rows = read_results(results)?;
    let psi = match psi_true {
        Some(p) => p,
        None => {
            let meta = meta_path(results);
            let text = std::fs::read_to_string(&meta).map_err(|_| {
                Error::InvalidInput(format!("no true value: pass --psi-true or provide {}", meta.display()))
            })?;
            serde_json::from_str::<RunMeta>(&text)?.true_psi
        }
    };
    let summary = summarize(&rows, psi)?;
    let out = out.unwrap_or_else(|| {
        let stem = file_stem(results);
        let stem = stem.strip_suffix("_results").unwrap_or(&stem).to_string();
        parent_or_here(results).join(format!("{stem}_summary.csv"))
    });
    write_summary(&summary, File::create(&out)?)?;
    println!("{}", out.display());
    Ok(())
}

fn plot(summary: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let rows = read_summary(summary)?;
    let stem = file_stem(summary);
    let stem = stem.strip_suffix("_summary").unwrap_or(&stem);
    for p in plot_summary(&rows, &out_dir.unwrap_or_else(|| parent_or_here(summary)), stem)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn diagnose_ep(config: &Path, out_dir: Option<PathBuf>, workers: Option<usize>, seed: Option<u64>) -> Result<()> {
    let cfg = EpConfig::load(config)?;
    let params = EpSuiteParams {
        dgp: cfg.dgp.clone(),
        sizes: cfg.sizes.clone(),
        replicates: cfg.replicates,
        strategy: cfg.strategy(),
        estimand: cfg.estimand,
        n_oracle: cfg.n_oracle,
        seed: seed.unwrap_or(cfg.seed),
        workers: workers.unwrap_or(cfg.workers),
    };
    let report = ep_suite(&params)?;
    let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let json = dir.join(format!("{}_ep.json", cfg.name));
    std::fs::write(&json, report.to_json())?;
    let csv = dir.join(format!("{}_ep.csv", cfg.name));
    report.write_records_csv(File::create(&csv)?)?;
    for s in &report.sizes {
        println!(
            "n={} mean_ep={:.5} se={:.5} var_scaled={:.4}",
            s.n, s.mean, s.se_mean, s.variance_scaled
        );
    }
    match report.slope {
        Some(slope) => println!("slope log Var(EP) vs log n: {slope:.3}"),
        None => println!("slope undefined"),
    }
    println!("{}\n{}", json.display(), csv.display());
    Ok(())
}

fn demo(config: &Path, out_dir: Option<PathBuf>, workers: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut cfg = DemoConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = demo_bias(&cfg, workers)?;
    for s in &report.summary {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        println!("{} n={} sqrt(n)|bias|={} sd={}", s.method, s.n, fmt(s.scaled_abs_bias), fmt(s.sd));
    }
    for p in report.write(&out_dir.unwrap_or_else(|| cfg.output_dir.clone()))? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed;
    let workers = cli.workers;
    let result = match cli.command {
        Command::Simulate { dgp, size, edge_constant, m, out_dir, prefix } => {
            simulate(dgp, &size, edge_constant, m, &out_dir, prefix, seed.unwrap_or(0))
        }
        Command::Run { config, out_dir } => run(&config, out_dir, workers, seed),
        Command::Summarize { results, psi_true, out } => summarize_cmd(&results, psi_true, out),
        Command::Plot { summary, out_dir } => plot(&summary, out_dir),
        Command::DiagnoseEp { config, out_dir } => diagnose_ep(&config, out_dir, workers, seed),
        Command::DemoBias { config, out_dir } => demo(&config, out_dir, workers, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
