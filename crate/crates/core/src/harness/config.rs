//! JSON experiment configurations. Parse errors and validation errors both
//! carry the path of the offending field.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dependence::DependenceStructure;
use crate::dgp::{DgpSpec, SizeSpec};
use crate::error::{Error, Result};
use crate::estimators::{Estimand, NuisanceStrategy, OutcomeFitMode, VarianceMethod};
use crate::learners::{LearnerSpec, Task};
use crate::splitters::{as_independent_split, network_lno_split, nlo_split, two_way_split, SplitPlan, SplitScheme};

fn default_k() -> usize {
    2
}

fn default_replicates() -> usize {
    500
}

fn default_estimand() -> Estimand {
    Estimand::Ate
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_outcome_learner() -> LearnerSpec {
    LearnerSpec::linear()
}

fn default_propensity_learner() -> LearnerSpec {
    LearnerSpec::logistic()
}

/// A splitting scheme with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    AsIndependent {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// `k x k` row/column blocks.
    TwoWay {
        #[serde(default = "default_k")]
        k: usize,
    },
    NetworkLno {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Contiguous blocks; `gap` defaults to the DGP's dependence order.
    Nlo {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        gap: Option<usize>,
    },
}

impl SchemeSpec {
    pub fn scheme(&self) -> SplitScheme {
        match self {
            SchemeSpec::AsIndependent { .. } => SplitScheme::AsIndependent,
            SchemeSpec::TwoWay { .. } => SplitScheme::TwoWay,
            SchemeSpec::NetworkLno { .. } => SplitScheme::NetworkLno,
            SchemeSpec::Nlo { .. } => SplitScheme::Nlo,
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            SchemeSpec::AsIndependent { k }
            | SchemeSpec::TwoWay { k }
            | SchemeSpec::NetworkLno { k }
            | SchemeSpec::Nlo { k, .. } => k,
        }
    }

    pub fn compatible_with(&self, dgp: &DgpSpec) -> bool {
        matches!(
            (self, dgp),
            (SchemeSpec::AsIndependent { .. }, _)
                | (SchemeSpec::TwoWay { .. }, DgpSpec::Clustered)
                | (SchemeSpec::NetworkLno { .. }, DgpSpec::Network { .. })
                | (SchemeSpec::Nlo { .. }, DgpSpec::TimeSeries { .. })
        )
    }

    /// Builds the split for a dataset with the given structure.
    pub fn plan(&self, structure: &DependenceStructure, seed: u64) -> Result<SplitPlan> {
        let n = structure.n();
        match (*self, structure) {
            (SchemeSpec::AsIndependent { k }, _) => as_independent_split(n, k, seed),
            (SchemeSpec::TwoWay { k }, DependenceStructure::TwoWayClustered(tw)) => two_way_split(tw, k, seed),
            (SchemeSpec::NetworkLno { k }, DependenceStructure::Network(adj)) => network_lno_split(adj, n, k, seed),
            (SchemeSpec::Nlo { k, gap }, DependenceStructure::TimeSeries { m, .. }) => {
                nlo_split(n, k, gap.unwrap_or(*m), seed)
            }
            (s, st) => Err(Error::InvalidInput(format!(
                "scheme {} cannot split {} data",
                s.scheme().as_str(),
                st.kind()
            ))),
        }
    }
}

/// Whether a variance estimator applies to the DGP's dependence.
pub fn variance_fits_dgp(method: VarianceMethod, dgp: &DgpSpec) -> bool {
    matches!(
        (method, dgp),
        (VarianceMethod::Iid, _)
            | (VarianceMethod::ClusterRobust, DgpSpec::Clustered)
            | (VarianceMethod::NetworkHac, DgpSpec::Network { .. })
            | (VarianceMethod::TsLagWindow, DgpSpec::TimeSeries { .. })
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dgp: DgpSpec,
    pub sizes: Vec<SizeSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "default_outcome_learner")]
    pub outcome_learner: LearnerSpec,
    #[serde(default = "default_propensity_learner")]
    pub propensity_learner: LearnerSpec,
    #[serde(default)]
    pub outcome_mode: OutcomeFitMode,
    /// Use the true nuisance functions instead of fitting.
    #[serde(default)]
    pub oracle_nuisances: bool,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    /// Defaults to the estimator matched to the DGP's dependence.
    #[serde(default)]
    pub variance: Option<VarianceMethod>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Compute the empirical-process term for each replicate.
    #[serde(default)]
    pub compute_ep: bool,
    /// Oracle sample size for the EP term; defaults to `max(1e5, 20 n)`.
    #[serde(default)]
    pub n_oracle: Option<usize>,
    /// Fill the `runtime_ms` column. Wall-clock times differ between runs,
    /// so results are then no longer byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

/// Reads a JSON file into `T`, reporting the field path of any error.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_json(&text)
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

fn check_learner(spec: &LearnerSpec, task: Task, field: &str) -> Result<()> {
    spec.validate(Some(task)).map_err(|(f, msg)| Error::config(format!("{field}.{f}"), msg))
}

fn check_dgp(dgp: &DgpSpec) -> Result<()> {
    dgp.validate().map_err(|(f, msg)| Error::config(format!("dgp.{f}"), msg))
}

fn check_sizes(dgp: &DgpSpec, sizes: &[SizeSpec]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::config("sizes", "must list at least one size"));
    }
    for (i, &s) in sizes.iter().enumerate() {
        dgp.check_size(s).map_err(|e| Error::config(format!("sizes[{i}]"), e.to_string()))?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = load_json(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn variance_method(&self) -> VarianceMethod {
        self.variance.unwrap_or_else(|| self.dgp.default_variance())
    }

    pub fn strategy(&self) -> NuisanceStrategy {
        if self.oracle_nuisances {
            NuisanceStrategy::fixed(self.dgp.oracle())
        } else {
            NuisanceStrategy::Fit {
                outcome: self.outcome_learner.clone(),
                propensity: self.propensity_learner.clone(),
                mode: self.outcome_mode,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.name.contains(',') || self.name.contains('"') || self.name.contains('\n') {
            return Err(Error::config("name", "must not contain commas, quotes or newlines"));
        }
        check_dgp(&self.dgp)?;
        check_sizes(&self.dgp, &self.sizes)?;
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "must list at least one scheme"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if !s.compatible_with(&self.dgp) {
                return Err(Error::config(
                    format!("schemes[{i}].scheme"),
                    format!("{} is incompatible with {} data", s.scheme().as_str(), self.dgp.structure_kind()),
                ));
            }
            if s.k() < 2 {
                return Err(Error::config(format!("schemes[{i}].k"), "must be at least 2"));
            }
            if let SchemeSpec::TwoWay { k } = s {
                for (j, size) in self.sizes.iter().enumerate() {
                    let (r, c) = match *size {
                        SizeSpec::Units(n) => (n, n),
                        SizeSpec::Grid([r, c]) => (r, c),
                    };
                    if r < *k || c < *k {
                        return Err(Error::config(
                            format!("sizes[{j}]"),
                            format!("a {r}x{c} grid cannot be cut into {k}x{k} blocks"),
                        ));
                    }
                }
            }
            if self.schemes[..i].contains(s) {
                return Err(Error::config(format!("schemes[{i}]"), "duplicate scheme"));
            }
        }
        if !self.oracle_nuisances {
            check_learner(&self.outcome_learner, Task::Regression, "outcome_learner")?;
            check_learner(&self.propensity_learner, Task::Binary, "propensity_learner")?;
        }
        self.dgp.true_psi(self.estimand).map_err(|e| Error::config("estimand", e.to_string()))?;
        let method = self.variance_method();
        if !variance_fits_dgp(method, &self.dgp) {
            return Err(Error::config(
                "variance",
                format!("{} is incompatible with {} data", method.as_str(), self.dgp.structure_kind()),
            ));
        }
        if self.n_oracle == Some(0) {
            return Err(Error::config("n_oracle", "must be positive"));
        }
        Ok(())
    }
}

/// `diagnose-ep` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpConfig {
    pub name: String,
    #[serde(default = "DgpSpec::network")]
    pub dgp: DgpSpec,
    pub sizes: Vec<SizeSpec>,
    pub replicates: usize,
    #[serde(default = "default_outcome_learner")]
    pub outcome_learner: LearnerSpec,
    #[serde(default = "default_propensity_learner")]
    pub propensity_learner: LearnerSpec,
    #[serde(default)]
    pub oracle_nuisances: bool,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    #[serde(default)]
    pub n_oracle: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl EpConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = load_json(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        check_dgp(&self.dgp)?;
        check_sizes(&self.dgp, &self.sizes)?;
        let units: Vec<usize> = self.sizes.iter().map(|&s| self.dgp.units(s)).collect();
        if units.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sizes", "must be strictly increasing"));
        }
        if self.replicates < 100 {
            return Err(Error::config("replicates", "EP diagnostics need at least 100 replicates"));
        }
        if !self.oracle_nuisances {
            check_learner(&self.outcome_learner, Task::Regression, "outcome_learner")?;
            check_learner(&self.propensity_learner, Task::Binary, "propensity_learner")?;
        }
        self.dgp.true_psi(self.estimand).map_err(|e| Error::config("estimand", e.to_string()))?;
        if let Some(n_oracle) = self.n_oracle {
            let largest = units.last().copied().unwrap_or(0);
            if n_oracle < 10 * largest.div_ceil(2) {
                return Err(Error::config("n_oracle", "must be at least 10 times the evaluation fold size"));
            }
        }
        Ok(())
    }

    pub fn strategy(&self) -> NuisanceStrategy {
        if self.oracle_nuisances {
            NuisanceStrategy::fixed(self.dgp.oracle())
        } else {
            NuisanceStrategy::fit(self.outcome_learner.clone(), self.propensity_learner.clone())
        }
    }
}

fn default_demo_dgp() -> DgpSpec {
    DgpSpec::independent()
}

fn default_demo_learner() -> LearnerSpec {
    LearnerSpec::nearest_neighbor()
}

fn default_demo_replicates() -> usize {
    200
}

/// `demo-bias` configuration: cross-fit and no-cross-fit estimates side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    #[serde(default = "default_demo_name")]
    pub name: String,
    #[serde(default = "default_demo_dgp")]
    pub dgp: DgpSpec,
    pub sizes: Vec<SizeSpec>,
    #[serde(default = "default_demo_replicates")]
    pub replicates: usize,
    #[serde(default = "default_demo_learner")]
    pub outcome_learner: LearnerSpec,
    #[serde(default = "default_demo_learner")]
    pub propensity_learner: LearnerSpec,
    #[serde(default)]
    pub outcome_mode: OutcomeFitMode,
    #[serde(default)]
    pub oracle_nuisances: bool,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_demo_name() -> String {
    "demo_bias".into()
}

impl DemoConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = load_json(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_dgp(&self.dgp)?;
        check_sizes(&self.dgp, &self.sizes)?;
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::config("k", "must be at least 2"));
        }
        if !self.oracle_nuisances {
            check_learner(&self.outcome_learner, Task::Regression, "outcome_learner")?;
            check_learner(&self.propensity_learner, Task::Binary, "propensity_learner")?;
        }
        self.dgp.true_psi(self.estimand).map_err(|e| Error::config("estimand", e.to_string()))?;
        Ok(())
    }

    pub fn strategy(&self) -> NuisanceStrategy {
        if self.oracle_nuisances {
            NuisanceStrategy::fixed(self.dgp.oracle())
        } else {
            NuisanceStrategy::Fit {
                outcome: self.outcome_learner.clone(),
                propensity: self.propensity_learner.clone(),
                mode: self.outcome_mode,
            }
        }
    }
}
