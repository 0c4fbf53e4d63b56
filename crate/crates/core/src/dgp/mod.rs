//! Data-generating processes with known truths.
//!
//! Each DGP produces an [`ObservationTable`] with its dependence structure and
//! exposes the true nuisance functions through [`Oracle`], the true estimand
//! values, and an independent "marginal" sampler used to approximate
//! population expectations.

pub mod clustered;
pub mod network;
pub mod quadrature;
pub mod timeseries;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::dependence::DependenceStructure;
use crate::error::{Error, Result};
use crate::estimators::{score_rows, Estimand, NuisanceModel, VarianceMethod};
use crate::learners::sigmoid;
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed, SimRng};

fn default_edge_constant() -> f64 {
    3.0
}

fn default_m() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DgpSpec {
    /// Two-way clustered grid; sizes are `[N, M]` (or `N` for a square grid).
    Clustered,
    /// Erdős–Rényi network with edge probability `edge_constant / n`.
    /// `edge_constant = 0` gives independent units.
    Network {
        #[serde(default = "default_edge_constant")]
        edge_constant: f64,
    },
    /// m-dependent series; sizes are series lengths `T`.
    TimeSeries {
        #[serde(default = "default_m")]
        m: usize,
    },
}

/// A sample size: a unit count (or series length), or an `[N, M]` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    Units(usize),
    Grid([usize; 2]),
}

impl SizeSpec {
    pub fn label(self) -> String {
        match self {
            SizeSpec::Units(n) => n.to_string(),
            SizeSpec::Grid([r, c]) => format!("{r}x{c}"),
        }
    }
}

impl std::fmt::Display for SizeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl DgpSpec {
    pub fn network() -> Self {
        DgpSpec::Network { edge_constant: default_edge_constant() }
    }

    /// Network DGP without edges: independent units.
    pub fn independent() -> Self {
        DgpSpec::Network { edge_constant: 0.0 }
    }

    pub fn time_series() -> Self {
        DgpSpec::TimeSeries { m: default_m() }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            DgpSpec::Clustered => "clustered",
            DgpSpec::Network { .. } => "network",
            DgpSpec::TimeSeries { .. } => "time_series",
        }
    }

    /// Structure kind the generated data carries.
    pub fn structure_kind(&self) -> &'static str {
        match self {
            DgpSpec::Clustered => "two_way_clustered",
            DgpSpec::Network { .. } => "network",
            DgpSpec::TimeSeries { .. } => "time_series",
        }
    }

    /// Variance estimator matched to the DGP's dependence.
    pub fn default_variance(&self) -> VarianceMethod {
        match self {
            DgpSpec::Clustered => VarianceMethod::ClusterRobust,
            DgpSpec::Network { .. } => VarianceMethod::NetworkHac,
            DgpSpec::TimeSeries { .. } => VarianceMethod::TsLagWindow,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        match *self {
            DgpSpec::Clustered => Ok(()),
            DgpSpec::Network { edge_constant } => {
                if edge_constant.is_finite() && edge_constant >= 0.0 {
                    Ok(())
                } else {
                    Err(("edge_constant", format!("must be finite and non-negative, got {edge_constant}")))
                }
            }
            DgpSpec::TimeSeries { m } => {
                if m >= 1 {
                    Ok(())
                } else {
                    Err(("m", "must be at least 1".into()))
                }
            }
        }
    }

    pub fn check_size(&self, size: SizeSpec) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match (self, size) {
            (DgpSpec::Clustered, SizeSpec::Units(n)) | (DgpSpec::Clustered, SizeSpec::Grid([n, _]))
                if n < 2 =>
            {
                bad(format!("clustered grids need at least 2 rows, got {n}"))
            }
            (DgpSpec::Clustered, SizeSpec::Grid([_, m])) if m < 2 => {
                bad(format!("clustered grids need at least 2 columns, got {m}"))
            }
            (DgpSpec::Clustered, _) => Ok(()),
            (_, SizeSpec::Grid(_)) => bad(format!("{} sizes are unit counts, not grids", self.tag())),
            (DgpSpec::Network { .. }, SizeSpec::Units(n)) if n < 10 => {
                bad(format!("network needs at least 10 units, got {n}"))
            }
            (DgpSpec::TimeSeries { m }, SizeSpec::Units(t)) if t <= 4 * m => {
                bad(format!("series length {t} must exceed 4m = {}", 4 * m))
            }
            _ => Ok(()),
        }
    }

    /// Number of analysis units a dataset of this size has.
    pub fn units(&self, size: SizeSpec) -> usize {
        match (self, size) {
            (DgpSpec::Clustered, SizeSpec::Units(n)) => n * n,
            (DgpSpec::Clustered, SizeSpec::Grid([r, c])) => r * c,
            (DgpSpec::TimeSeries { m }, SizeSpec::Units(t)) => t.saturating_sub(timeseries::analysis_window(t, *m)),
            (_, SizeSpec::Units(n)) => n,
            (_, SizeSpec::Grid([r, c])) => r * c,
        }
    }

    pub fn generate(&self, size: SizeSpec, seed: u64) -> Result<SimulatedDataset> {
        self.check_size(size)?;
        let mut rng = rng_from_seed(seed);
        let (table, structure) = match (self, size) {
            (DgpSpec::Clustered, SizeSpec::Units(n)) => clustered::generate(n, n, &mut rng)?,
            (DgpSpec::Clustered, SizeSpec::Grid([r, c])) => clustered::generate(r, c, &mut rng)?,
            (DgpSpec::Network { edge_constant }, SizeSpec::Units(n)) => network::generate(n, *edge_constant, &mut rng)?,
            (DgpSpec::TimeSeries { m }, SizeSpec::Units(t)) => timeseries::generate(t, *m, &mut rng)?,
            _ => unreachable!("sizes checked above"),
        };
        Ok(SimulatedDataset { dgp: self.clone(), size, seed, table, structure })
    }

    /// `count` draws from the marginal law of one unit of a size-`size`
    /// dataset, independent of any generated dataset.
    pub fn marginal_sample(&self, size: SizeSpec, count: usize, seed: u64) -> Result<ObservationTable> {
        self.check_size(size)?;
        let mut rng = rng_from_seed(seed);
        match (self, size) {
            (DgpSpec::Clustered, _) => clustered::marginal_sample(count, &mut rng),
            (DgpSpec::Network { edge_constant }, SizeSpec::Units(n)) => {
                network::marginal_sample(n, *edge_constant, count, &mut rng)
            }
            (DgpSpec::TimeSeries { m }, SizeSpec::Units(t)) => timeseries::marginal_sample(t, *m, count, &mut rng),
            _ => unreachable!("sizes checked above"),
        }
    }

    pub fn oracle(&self) -> Oracle {
        match self {
            DgpSpec::Clustered => Oracle::Clustered(clustered::ClusteredOracle::default()),
            DgpSpec::Network { .. } => Oracle::Network,
            DgpSpec::TimeSeries { m } => Oracle::TimeSeries { m: *m },
        }
    }

    pub fn true_psi(&self, estimand: Estimand) -> Result<f64> {
        let (control, ate) = match self {
            DgpSpec::Clustered => (clustered::true_control_mean(), clustered::TRUE_ATE),
            DgpSpec::Network { .. } => (network::MEAN_MU, network::TRUE_ATE),
            DgpSpec::TimeSeries { m } => (timeseries::mean_x(*m) + 0.3, 1.0),
        };
        match estimand {
            Estimand::Ate => Ok(ate),
            Estimand::CounterfactualMean(0) => Ok(control),
            Estimand::CounterfactualMean(1) => Ok(control + ate),
            Estimand::CounterfactualMean(a) => Err(Error::OracleUnavailable(format!("treatment arm {a}"))),
        }
    }

    /// Monte Carlo average of the conditional treatment effect over `draws`
    /// independent units, with its standard error. The time-series effect is
    /// 1 for every unit by construction.
    pub fn monte_carlo_ate(&self, draws: usize, seed: u64) -> (f64, f64) {
        let draw: fn(&mut SimRng) -> f64 = match self {
            DgpSpec::Clustered => clustered::effect_draw,
            DgpSpec::Network { .. } => network::effect_draw,
            DgpSpec::TimeSeries { .. } => return (1.0, 0.0),
        };
        const CHUNK: usize = 1 << 20;
        let chunks = draws.div_ceil(CHUNK);
        let sums: Vec<(f64, f64)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = rng_from_seed(derive_seed(seed, &[c as u64]));
                let len = CHUNK.min(draws - c * CHUNK);
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..len {
                    let v = draw(&mut rng);
                    s += v;
                    s2 += v * v;
                }
                (s, s2)
            })
            .collect();
        let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
        let nf = draws as f64;
        let mean = s / nf;
        let var = (s2 / nf - mean * mean) * nf / (nf - 1.0);
        (mean, (var / nf).sqrt())
    }
}

/// True nuisance functions, evaluated on a DGP's analysis covariates.
#[derive(Debug, Clone)]
pub enum Oracle {
    Clustered(clustered::ClusteredOracle),
    Network,
    TimeSeries { m: usize },
}

impl NuisanceModel for Oracle {
    fn outcome(&self, covariates: &Matrix, a: u8) -> Result<Vec<f64>> {
        Ok(covariates
            .rows_iter()
            .map(|row| match self {
                Oracle::Clustered(o) => o.outcome_row(row, a),
                Oracle::Network => network::outcome_mean(row, a),
                Oracle::TimeSeries { m } => f64::from(a) + timeseries::history_from_features(row, *m).0 + 0.3,
            })
            .collect())
    }

    fn propensity(&self, covariates: &Matrix) -> Result<Vec<f64>> {
        Ok(covariates
            .rows_iter()
            .map(|row| match self {
                Oracle::Clustered(o) => o.propensity_row(row),
                Oracle::Network => network::propensity(row),
                Oracle::TimeSeries { m } => {
                    let (x, sa) = timeseries::history_from_features(row, *m);
                    sigmoid((x + sa - 0.5) / *m as f64)
                }
            })
            .collect())
    }
}

/// Oracle scores `f_eta0` for every row of `table`.
pub fn oracle_scores(dgp: &DgpSpec, table: &ObservationTable, estimand: Estimand) -> Result<Vec<f64>> {
    let rows: Vec<usize> = (0..table.n()).collect();
    Ok(score_rows(table, &rows, &dgp.oracle(), estimand)?.scores)
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub dgp: DgpSpec,
    pub size: SizeSpec,
    pub seed: u64,
    pub table: ObservationTable,
    pub structure: DependenceStructure,
}

impl SimulatedDataset {
    pub fn oracle(&self) -> Oracle {
        self.dgp.oracle()
    }

    pub fn true_psi(&self, estimand: Estimand) -> Result<f64> {
        self.dgp.true_psi(estimand)
    }

    pub fn oracle_scores(&self, estimand: Estimand) -> Result<Vec<f64>> {
        oracle_scores(&self.dgp, &self.table, estimand)
    }

    /// Oracle score of a single unit.
    pub fn oracle_score(&self, unit: usize, estimand: Estimand) -> Result<f64> {
        if unit >= self.table.n() {
            return Err(Error::IndexOutOfRange { index: unit, len: self.table.n() });
        }
        Ok(score_rows(&self.table, &[unit], &self.oracle(), estimand)?.scores[0])
    }

    pub fn oracle_file(&self) -> OracleFile {
        let psi = |e| self.true_psi(e).ok();
        OracleFile {
            dgp: self.dgp.clone(),
            size: self.size,
            seed: self.seed,
            n: self.table.n(),
            true_ate: psi(Estimand::Ate),
            true_mean_0: psi(Estimand::CounterfactualMean(0)),
            true_mean_1: psi(Estimand::CounterfactualMean(1)),
        }
    }
}

/// JSON sidecar written next to a simulated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub dgp: DgpSpec,
    pub size: SizeSpec,
    pub seed: u64,
    pub n: usize,
    pub true_ate: Option<f64>,
    pub true_mean_0: Option<f64>,
    pub true_mean_1: Option<f64>,
}
