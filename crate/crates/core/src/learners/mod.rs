//! Nuisance learners behind a single fit/predict interface.
//!
//! All learners are deterministic functions of their inputs. Binary-task
//! predictions are clipped to `[PROPENSITY_CLIP, 1 - PROPENSITY_CLIP]`.

mod knn;
mod lagged;
mod linear;
mod logistic;
mod mars;
mod trees;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use knn::NearestNeighbor;
pub use lagged::{build_lagged_features, lag_window};
pub use linear::{ridge_fit, LinearModel};
pub use logistic::{logistic_fit, LogisticFit, LogisticModel};
pub use mars::{BasisTerm, Hinge, MarsModel};
pub use trees::{Tree, TreeEnsemble};

/// Lower/upper clipping bound for binary-task predictions.
pub const PROPENSITY_CLIP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    LinearGlm,
    LogisticGlm,
    BoostedTrees,
    MarsLite,
    #[serde(rename = "interpolator_1nn")]
    Interpolator1nn,
}

fn default_rounds() -> usize {
    100
}
fn default_max_depth() -> usize {
    3
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_ridge() -> f64 {
    1e-6
}
fn default_leaf_l2() -> f64 {
    1.0
}
fn default_min_leaf() -> usize {
    5
}
fn default_max_iter() -> usize {
    100
}
fn default_mars_degree() -> usize {
    1
}
fn default_max_knots() -> usize {
    10
}

/// Learner kind plus hyperparameters. Fields irrelevant to a kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// Boosting rounds.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Tree depth for boosting.
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Cap on MARS basis terms (intercept included); `None` means `min(20, n/5)`.
    #[serde(default)]
    pub max_terms: Option<usize>,
    /// Ridge penalty for the GLMs.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// L2 penalty on boosted leaf values.
    #[serde(default = "default_leaf_l2")]
    pub leaf_l2: f64,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// IRLS iteration cap.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Maximum interaction degree for MARS.
    #[serde(default = "default_mars_degree")]
    pub mars_degree: usize,
    /// Candidate knots per variable in the MARS forward pass.
    #[serde(default = "default_max_knots")]
    pub max_knots: usize,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            rounds: default_rounds(),
            max_depth: default_max_depth(),
            learning_rate: default_learning_rate(),
            max_terms: None,
            ridge: default_ridge(),
            leaf_l2: default_leaf_l2(),
            min_leaf: default_min_leaf(),
            max_iter: default_max_iter(),
            mars_degree: default_mars_degree(),
            max_knots: default_max_knots(),
        }
    }

    pub fn linear() -> Self {
        Self::new(LearnerKind::LinearGlm)
    }

    pub fn logistic() -> Self {
        Self { ridge: 1e-4, ..Self::new(LearnerKind::LogisticGlm) }
    }

    pub fn boosted() -> Self {
        Self::new(LearnerKind::BoostedTrees)
    }

    pub fn mars() -> Self {
        Self::new(LearnerKind::MarsLite)
    }

    pub fn nearest_neighbor() -> Self {
        Self::new(LearnerKind::Interpolator1nn)
    }

    /// Checks hyperparameter ranges and kind/task compatibility. Errors carry
    /// the offending field name.
    pub fn validate(&self, task: Option<Task>) -> std::result::Result<(), (&'static str, String)> {
        if self.kind == LearnerKind::LogisticGlm && task == Some(Task::Regression) {
            return Err(("kind", "logistic_glm requires a binary target".into()));
        }
        match self.kind {
            LearnerKind::BoostedTrees => {
                if self.rounds == 0 {
                    return Err(("rounds", "must be positive".into()));
                }
                if self.max_depth == 0 {
                    return Err(("max_depth", "must be positive".into()));
                }
                if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
                    return Err(("learning_rate", "must lie in (0, 1]".into()));
                }
                if !(self.leaf_l2 >= 0.0) {
                    return Err(("leaf_l2", "must be non-negative".into()));
                }
                if self.min_leaf == 0 {
                    return Err(("min_leaf", "must be positive".into()));
                }
            }
            LearnerKind::LinearGlm | LearnerKind::LogisticGlm => {
                if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
                    return Err(("ridge", "must be a finite non-negative number".into()));
                }
                if self.max_iter == 0 {
                    return Err(("max_iter", "must be positive".into()));
                }
            }
            LearnerKind::MarsLite => {
                if self.max_terms == Some(0) {
                    return Err(("max_terms", "must be positive".into()));
                }
                if !(1..=2).contains(&self.mars_degree) {
                    return Err(("mars_degree", "must be 1 or 2".into()));
                }
                if self.max_knots == 0 {
                    return Err(("max_knots", "must be positive".into()));
                }
            }
            LearnerKind::Interpolator1nn => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearModel),
    Logistic(LogisticModel),
    BoostedTrees(TreeEnsemble),
    Mars(MarsModel),
    NearestNeighbor(NearestNeighbor),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub task: Task,
    pub width: usize,
    pub params: ModelParams,
}

fn check_inputs(x: &Matrix, y: &[f64], task: Task) -> Result<()> {
    if x.nrows() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows to fit, got {}", x.nrows())));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidInput("need at least one feature column".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::SizeMismatch { expected: x.nrows(), found: y.len() });
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("features".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    if task == Task::Binary && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("binary task requires 0/1 targets".into()));
    }
    Ok(())
}

pub fn fit(spec: &LearnerSpec, x: &Matrix, y: &[f64], task: Task) -> Result<FittedModel> {
    check_inputs(x, y, task)?;
    spec.validate(Some(task)).map_err(|(field, msg)| Error::InvalidInput(format!("learner {field}: {msg}")))?;
    let params = match spec.kind {
        LearnerKind::LinearGlm => ModelParams::Linear(ridge_fit(x, y, spec.ridge)?),
        LearnerKind::LogisticGlm => ModelParams::Logistic(logistic_fit(x, y, spec.ridge, spec.max_iter)?.model),
        LearnerKind::BoostedTrees => ModelParams::BoostedTrees(TreeEnsemble::fit(spec, x, y, task)?),
        LearnerKind::MarsLite => ModelParams::Mars(MarsModel::fit(spec, x, y, task)?),
        LearnerKind::Interpolator1nn => ModelParams::NearestNeighbor(NearestNeighbor::fit(x, y)),
    };
    Ok(FittedModel { task, width: x.ncols(), params })
}

impl FittedModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.width {
            return Err(Error::WidthMismatch { expected: self.width, found: x.ncols() });
        }
        let raw = match &self.params {
            ModelParams::Linear(m) => m.predict(x),
            ModelParams::Logistic(m) => m.predict_proba(x),
            ModelParams::BoostedTrees(m) => m.predict(x),
            ModelParams::Mars(m) => m.predict(x),
            ModelParams::NearestNeighbor(m) => m.predict(x),
        };
        if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("prediction {v}")));
        }
        Ok(match self.task {
            Task::Regression => raw,
            Task::Binary => raw.into_iter().map(clip_probability).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

pub fn clip_probability(p: f64) -> f64 {
    p.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_from_json() {
        let s: LearnerSpec = serde_json::from_str(r#"{"kind":"boosted_trees","rounds":50}"#).unwrap();
        assert_eq!(s.rounds, 50);
        assert_eq!(s.max_depth, 3);
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"kind":"boosted_trees","depth":2}"#).is_err());
    }

    #[test]
    fn validation_catches_bad_hyperparameters() {
        let mut s = LearnerSpec::boosted();
        s.learning_rate = 0.0;
        assert_eq!(s.validate(None).unwrap_err().0, "learning_rate");
        assert_eq!(LearnerSpec::logistic().validate(Some(Task::Regression)).unwrap_err().0, "kind");
    }

    #[test]
    fn predict_checks_width() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let m = fit(&LearnerSpec::linear(), &x, &[0.0, 1.0, 2.0], Task::Regression).unwrap();
        let wide = Matrix::zeros(2, 2);
        assert!(matches!(m.predict(&wide), Err(Error::WidthMismatch { expected: 1, found: 2 })));
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let x = Matrix::from_rows(&[vec![0.0], vec![f64::INFINITY]]).unwrap();
        assert!(matches!(fit(&LearnerSpec::linear(), &x, &[0.0, 1.0], Task::Regression), Err(Error::NonFinite(_))));
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(fit(&LearnerSpec::logistic(), &x, &[0.0, 0.5], Task::Binary).is_err());
        assert!(fit(&LearnerSpec::linear(), &Matrix::from_rows(&[vec![0.0]]).unwrap(), &[0.0], Task::Regression).is_err());
    }

    #[test]
    fn binary_predictions_are_clipped() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let m = fit(&LearnerSpec::nearest_neighbor(), &x, &[0.0, 0.0, 1.0, 1.0], Task::Binary).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![0.01, 0.01, 0.99, 0.99]);
    }

    #[test]
    fn fitting_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i % 7) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + r[1]).collect();
        for spec in [LearnerSpec::linear(), LearnerSpec::boosted(), LearnerSpec::mars(), LearnerSpec::nearest_neighbor()] {
            let a = fit(&spec, &x, &y, Task::Regression).unwrap().to_json();
            let b = fit(&spec, &x, &y, Task::Regression).unwrap().to_json();
            assert_eq!(a, b);
        }
    }
}
