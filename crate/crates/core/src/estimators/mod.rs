//! The cross-fitted one-step (AIPW) estimator and its no-cross-fit variant.
//!
//! Cross-fitting fits the nuisance pair `(m, g)` on each fold's training rows,
//! scores the fold's evaluation rows, and pools the scores so every unit is
//! scored exactly once. The point estimate is the mean of the pooled scores.

mod score;
mod variance;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::dependence::DependenceStructure;
use crate::error::{Error, Result};
use crate::learners::{self, clip_probability, FittedModel, LearnerSpec, Task};
use crate::matrix::Matrix;
use crate::splitters::SplitPlan;

pub use score::{aipw_score, estimand_score, Estimand, UnitNuisance};
pub use variance::{correlated_pair_sum, variance, VarianceEstimate, VarianceMethod};

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;

/// Anything that can supply outcome regressions `m(a, L)` and propensities
/// `g(1 | L)` for a block of covariate rows.
pub trait NuisanceModel: Send + Sync {
    fn outcome(&self, covariates: &Matrix, a: u8) -> Result<Vec<f64>>;
    fn propensity(&self, covariates: &Matrix) -> Result<Vec<f64>>;

    fn unit_nuisances(&self, covariates: &Matrix) -> Result<Vec<UnitNuisance>> {
        let m0 = self.outcome(covariates, 0)?;
        let m1 = self.outcome(covariates, 1)?;
        let g1 = self.propensity(covariates)?;
        Ok((0..covariates.nrows()).map(|i| UnitNuisance { m0: m0[i], m1: m1[i], g1: g1[i] }).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeFitMode {
    /// One model on `(L, A)` with the treatment as the last feature.
    #[default]
    Joint,
    /// Separate models on the treated and control rows.
    PerArm,
}

#[derive(Debug, Clone)]
pub enum OutcomeModel {
    Joint(FittedModel),
    PerArm { control: FittedModel, treated: FittedModel },
}

/// Fitted outcome regression and propensity model.
#[derive(Debug, Clone)]
pub struct NuisancePair {
    pub outcome: OutcomeModel,
    pub propensity: FittedModel,
}

impl NuisancePair {
    pub fn fit(
        table: &ObservationTable,
        outcome_spec: &LearnerSpec,
        propensity_spec: &LearnerSpec,
        mode: OutcomeFitMode,
    ) -> Result<Self> {
        let l = table.covariates();
        let a: Vec<f64> = table.treatment().iter().map(|&t| f64::from(t)).collect();
        let outcome = match mode {
            OutcomeFitMode::Joint => {
                OutcomeModel::Joint(learners::fit(outcome_spec, &l.with_column(&a)?, table.outcome(), Task::Regression)?)
            }
            OutcomeFitMode::PerArm => {
                let arm = |v: u8| -> Result<FittedModel> {
                    let idx: Vec<usize> = (0..table.n()).filter(|&i| table.treatment()[i] == v).collect();
                    let y: Vec<f64> = idx.iter().map(|&i| table.outcome()[i]).collect();
                    learners::fit(outcome_spec, &l.select_rows(&idx), &y, Task::Regression)
                };
                OutcomeModel::PerArm { control: arm(0)?, treated: arm(1)? }
            }
        };
        let propensity = learners::fit(propensity_spec, l, &a, Task::Binary)?;
        Ok(Self { outcome, propensity })
    }
}

impl NuisanceModel for NuisancePair {
    fn outcome(&self, covariates: &Matrix, a: u8) -> Result<Vec<f64>> {
        match &self.outcome {
            OutcomeModel::Joint(m) => m.predict(&covariates.with_constant_column(f64::from(a))),
            OutcomeModel::PerArm { control, treated } => {
                if a == 1 {
                    treated.predict(covariates)
                } else {
                    control.predict(covariates)
                }
            }
        }
    }

    fn propensity(&self, covariates: &Matrix) -> Result<Vec<f64>> {
        self.propensity.predict(covariates)
    }
}

/// Where the nuisance functions come from.
#[derive(Clone)]
pub enum NuisanceStrategy {
    Fit { outcome: LearnerSpec, propensity: LearnerSpec, mode: OutcomeFitMode },
    /// Fixed functions (e.g. the true nuisances), used as-is on every fold.
    Fixed(Arc<dyn NuisanceModel>),
}

impl std::fmt::Debug for NuisanceStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NuisanceStrategy::Fit { outcome, propensity, mode } => f
                .debug_struct("Fit")
                .field("outcome", &outcome.kind)
                .field("propensity", &propensity.kind)
                .field("mode", mode)
                .finish(),
            NuisanceStrategy::Fixed(_) => f.write_str("Fixed"),
        }
    }
}

impl NuisanceStrategy {
    pub fn fit(outcome: LearnerSpec, propensity: LearnerSpec) -> Self {
        NuisanceStrategy::Fit { outcome, propensity, mode: OutcomeFitMode::Joint }
    }

    pub fn fixed(model: impl NuisanceModel + 'static) -> Self {
        NuisanceStrategy::Fixed(Arc::new(model))
    }

    /// Nuisance functions trained on `train` rows of `table`.
    pub fn train(&self, table: &ObservationTable, train: &[usize]) -> Result<Arc<dyn NuisanceModel>> {
        match self {
            NuisanceStrategy::Fit { outcome, propensity, mode } => {
                let sub = table.select(train)?;
                Ok(Arc::new(NuisancePair::fit(&sub, outcome, propensity, *mode)?))
            }
            NuisanceStrategy::Fixed(m) => Ok(Arc::clone(m)),
        }
    }
}

/// Per-unit scores, ordered by unit index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector {
    pub units: Vec<usize>,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_eval: usize,
    /// Mean of the propensity predictions on the evaluation rows.
    pub mean_propensity: f64,
    /// Mean score over the evaluation rows.
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub estimand: Estimand,
    pub estimate: f64,
    /// Mean of the plug-in terms; `estimate - plug_in` is the residual correction.
    pub plug_in: f64,
    pub sigma2: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub variance_method: VarianceMethod,
    pub variance_clamped: bool,
    pub n: usize,
    pub folds: Vec<FoldSummary>,
}

impl EstimateResult {
    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimate serializes")
    }
}

/// Scores of a block of rows under one nuisance model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRows {
    pub scores: Vec<f64>,
    /// Plug-in term of each score (`m(a, L)`, or `m(1, L) - m(0, L)` for the ATE).
    pub plug_in: Vec<f64>,
    pub mean_propensity: f64,
}

/// Scores `rows` of `table` under `nuisance`, in the order of `rows`.
pub fn score_rows(
    table: &ObservationTable,
    rows: &[usize],
    nuisance: &dyn NuisanceModel,
    estimand: Estimand,
) -> Result<ScoredRows> {
    let cov = table.covariates().select_rows(rows);
    let nus = nuisance.unit_nuisances(&cov)?;
    let mut scores = Vec::with_capacity(rows.len());
    let mut plug_in = Vec::with_capacity(rows.len());
    let mut g_sum = 0.0;
    for (&i, nu) in rows.iter().zip(nus) {
        let nu = UnitNuisance { g1: clip_probability(nu.g1), ..nu };
        g_sum += nu.g1;
        scores.push(estimand_score(estimand, nu, table.treatment()[i], table.outcome()[i])?);
        plug_in.push(match estimand {
            Estimand::CounterfactualMean(1) => nu.m1,
            Estimand::CounterfactualMean(_) => nu.m0,
            Estimand::Ate => nu.m1 - nu.m0,
        });
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    Ok(ScoredRows { scores, plug_in, mean_propensity: g_sum / rows.len().max(1) as f64 })
}

fn finish(
    estimand: Estimand,
    scores: ScoreVector,
    plug_in: &[f64],
    structure: &DependenceStructure,
    method: VarianceMethod,
    folds: Vec<FoldSummary>,
) -> Result<(EstimateResult, ScoreVector)> {
    let estimate = scores.mean();
    let plug_in = plug_in.iter().sum::<f64>() / plug_in.len() as f64;
    let v = variance(&scores.values, structure, method)?;
    let result = EstimateResult {
        estimand,
        estimate,
        plug_in,
        sigma2: v.sigma2,
        se: v.se,
        ci_low: estimate - Z_95 * v.se,
        ci_high: estimate + Z_95 * v.se,
        variance_method: method,
        variance_clamped: v.clamped,
        n: scores.values.len(),
        folds,
    };
    Ok((result, scores))
}

fn check_table(table: &ObservationTable, structure: &DependenceStructure) -> Result<()> {
    if structure.n() != table.n() {
        return Err(Error::SizeMismatch { expected: table.n(), found: structure.n() });
    }
    Ok(())
}

/// Cross-fitted one-step estimator over the folds of `plan`.
pub fn crossfit_estimate(
    table: &ObservationTable,
    structure: &DependenceStructure,
    plan: &SplitPlan,
    nuisance: &NuisanceStrategy,
    estimand: Estimand,
    method: VarianceMethod,
) -> Result<(EstimateResult, ScoreVector)> {
    let out = crossfit_with_models(table, structure, plan, nuisance, estimand, method)?;
    Ok((out.result, out.scores))
}

/// Cross-fit output together with the per-fold nuisance models.
pub struct CrossfitOutput {
    pub result: EstimateResult,
    pub scores: ScoreVector,
    pub models: Vec<Arc<dyn NuisanceModel>>,
}

/// [`crossfit_estimate`], also returning the nuisance model trained for each fold.
pub fn crossfit_with_models(
    table: &ObservationTable,
    structure: &DependenceStructure,
    plan: &SplitPlan,
    nuisance: &NuisanceStrategy,
    estimand: Estimand,
    method: VarianceMethod,
) -> Result<CrossfitOutput> {
    check_table(table, structure)?;
    if plan.n != table.n() {
        return Err(Error::SizeMismatch { expected: table.n(), found: plan.n });
    }
    plan.validate()?;
    let mut pooled = vec![f64::NAN; table.n()];
    let mut plug_in = vec![f64::NAN; table.n()];
    let mut folds = Vec::with_capacity(plan.folds.len());
    let mut models = Vec::with_capacity(plan.folds.len());
    for (f, fold) in plan.folds.iter().enumerate() {
        let model = nuisance.train(table, &fold.train).map_err(|e| e.in_fold(f))?;
        let scored = score_rows(table, &fold.eval, model.as_ref(), estimand).map_err(|e| e.in_fold(f))?;
        models.push(model);
        for (k, &i) in fold.eval.iter().enumerate() {
            pooled[i] = scored.scores[k];
            plug_in[i] = scored.plug_in[k];
        }
        let scores = scored.scores;
        let mean_g = scored.mean_propensity;
        folds.push(FoldSummary {
            fold: f,
            n_train: fold.train.len(),
            n_eval: fold.eval.len(),
            mean_propensity: mean_g,
            mean_score: scores.iter().sum::<f64>() / scores.len().max(1) as f64,
        });
    }
    let scores = ScoreVector { units: (0..table.n()).collect(), values: pooled };
    let (result, scores) = finish(estimand, scores, &plug_in, structure, method, folds)?;
    Ok(CrossfitOutput { result, scores, models })
}

/// One-step estimator with nuisances fit and scored on the same rows.
pub fn nocrossfit_estimate(
    table: &ObservationTable,
    structure: &DependenceStructure,
    nuisance: &NuisanceStrategy,
    estimand: Estimand,
    method: VarianceMethod,
) -> Result<(EstimateResult, ScoreVector)> {
    check_table(table, structure)?;
    let all: Vec<usize> = (0..table.n()).collect();
    let model = nuisance.train(table, &all)?;
    let scored = score_rows(table, &all, model.as_ref(), estimand)?;
    let (values, mean_g) = (scored.scores, scored.mean_propensity);
    let summary = FoldSummary {
        fold: 0,
        n_train: table.n(),
        n_eval: table.n(),
        mean_propensity: mean_g,
        mean_score: values.iter().sum::<f64>() / values.len() as f64,
    };
    finish(estimand, ScoreVector { units: all, values }, &scored.plug_in, structure, method, vec![summary])
}
