//! Configuration-driven Monte Carlo experiments and their artifacts.

pub mod config;
pub mod demo;
pub mod plot;
pub mod run;
pub mod summarize;

pub use demo::{demo_bias, DemoReport, DemoRow, DemoSummary};
pub use plot::{plot_summary, Chart, Metric, Series};
pub use config::{DemoConfig, EpConfig, ExperimentConfig, SchemeSpec};
pub use run::{read_results, run_experiment, write_results, write_run, ResultRow, RunMeta, RunOutput};
pub use summarize::{read_summary, summarize, write_summary, SummaryRow};
