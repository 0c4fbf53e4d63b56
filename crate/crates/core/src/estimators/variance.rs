//! Variance estimators for the mean of a score vector.
//!
//! The dependence-aware estimators all share one shape: sum the products of
//! centered scores over every pair the structure marks as correlated (plus the
//! diagonal) and divide by `n^2`.

use serde::{Deserialize, Serialize};

use crate::dependence::DependenceStructure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    Iid,
    ClusterRobust,
    NetworkHac,
    TsLagWindow,
}

impl VarianceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            VarianceMethod::Iid => "iid",
            VarianceMethod::ClusterRobust => "cluster_robust",
            VarianceMethod::NetworkHac => "network_hac",
            VarianceMethod::TsLagWindow => "ts_lag_window",
        }
    }

    pub fn compatible_with(self, structure: &DependenceStructure) -> bool {
        matches!(
            (self, structure),
            (VarianceMethod::Iid, _)
                | (VarianceMethod::ClusterRobust, DependenceStructure::OneWayClustered { .. })
                | (VarianceMethod::ClusterRobust, DependenceStructure::TwoWayClustered(_))
                | (VarianceMethod::NetworkHac, DependenceStructure::Network(_))
                | (VarianceMethod::TsLagWindow, DependenceStructure::TimeSeries { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    /// Per-unit (long-run) variance, `n * var_of_mean`.
    pub sigma2: f64,
    /// Estimated variance of the sample mean.
    pub var_of_mean: f64,
    pub se: f64,
    /// Set when the requested estimator was non-positive and the iid value was used instead.
    pub clamped: bool,
}

fn centered(scores: &[f64]) -> Vec<f64> {
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    scores.iter().map(|s| s - mean).collect()
}

fn iid_sigma2(scores: &[f64]) -> f64 {
    let n = scores.len();
    if n < 2 {
        return 0.0;
    }
    centered(scores).iter().map(|c| c * c).sum::<f64>() / (n - 1) as f64
}

/// `sum_i c_i^2 + sum_{i != j correlated} c_i c_j` over centered scores.
pub fn correlated_pair_sum(scores: &[f64], structure: &DependenceStructure) -> Result<f64> {
    let c = centered(scores);
    let mut total: f64 = c.iter().map(|v| v * v).sum();
    match structure {
        DependenceStructure::TimeSeries { n, m } => {
            for lag in 1..=*m {
                for t in lag..*n {
                    total += 2.0 * c[t] * c[t - lag];
                }
            }
        }
        _ => {
            for (i, ci) in c.iter().enumerate() {
                for j in structure.neighbors(i)? {
                    total += ci * c[j];
                }
            }
        }
    }
    Ok(total)
}

pub fn variance(scores: &[f64], structure: &DependenceStructure, method: VarianceMethod) -> Result<VarianceEstimate> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::InvalidInput("no scores".into()));
    }
    if structure.n() != n {
        return Err(Error::SizeMismatch { expected: structure.n(), found: n });
    }
    if !method.compatible_with(structure) {
        return Err(Error::IncompatibleVariance { method: method.as_str(), structure: structure.kind() });
    }
    let nf = n as f64;
    let iid = iid_sigma2(scores);
    let sigma2 = match method {
        VarianceMethod::Iid => iid,
        VarianceMethod::ClusterRobust => {
            // small-sample factor n/(n-1) so singleton clusters reproduce the iid estimator
            let dof = if n > 1 { nf / (nf - 1.0) } else { 1.0 };
            correlated_pair_sum(scores, structure)? / nf * dof
        }
        VarianceMethod::NetworkHac | VarianceMethod::TsLagWindow => correlated_pair_sum(scores, structure)? / nf,
    };
    let (sigma2, clamped) = if sigma2 > 0.0 && sigma2.is_finite() { (sigma2, false) } else { (iid, true) };
    let var_of_mean = sigma2 / nf;
    Ok(VarianceEstimate { sigma2, var_of_mean, se: var_of_mean.sqrt(), clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_iid() {
        let v = variance(&[1.0, -1.0], &DependenceStructure::Independent { n: 2 }, VarianceMethod::Iid).unwrap();
        assert_eq!(v.sigma2, 2.0);
        assert_eq!(v.se, 1.0);
        assert!(!v.clamped);
    }

    #[test]
    fn constant_scores_take_the_clamp_path() {
        let s = DependenceStructure::network(3, &[(0, 1)]).unwrap();
        let v = variance(&[2.0, 2.0, 2.0], &s, VarianceMethod::NetworkHac).unwrap();
        assert!(v.clamped);
        assert_eq!(v.sigma2, 0.0);
    }

    #[test]
    fn single_edge_pair_sum() {
        let scores = [3.0, 1.0, -0.5, 0.5];
        let s = DependenceStructure::network(4, &[(0, 1)]).unwrap();
        let v = variance(&scores, &s, VarianceMethod::NetworkHac).unwrap();
        let mean = scores.iter().sum::<f64>() / 4.0;
        let c: Vec<f64> = scores.iter().map(|x| x - mean).collect();
        let expected = c.iter().map(|x| x * x).sum::<f64>() + 2.0 * c[0] * c[1];
        assert!((v.var_of_mean * 16.0 - expected).abs() < 1e-12);
    }

    #[test]
    fn lag_window_matches_pair_enumeration() {
        let scores: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let ts = DependenceStructure::TimeSeries { n: 12, m: 2 };
        let fast = correlated_pair_sum(&scores, &ts).unwrap();
        let mean = scores.iter().sum::<f64>() / 12.0;
        let mut brute = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                if i == j || ts.is_correlated(i, j) {
                    brute += (scores[i] - mean) * (scores[j] - mean);
                }
            }
        }
        assert!((fast - brute).abs() < 1e-10);
    }

    #[test]
    fn incompatible_methods_are_rejected() {
        let s = DependenceStructure::Independent { n: 2 };
        assert!(matches!(
            variance(&[1.0, 2.0], &s, VarianceMethod::NetworkHac),
            Err(Error::IncompatibleVariance { .. })
        ));
        let ts = DependenceStructure::TimeSeries { n: 2, m: 1 };
        assert!(variance(&[1.0, 2.0], &ts, VarianceMethod::ClusterRobust).is_err());
    }

    proptest! {
        #[test]
        fn singleton_clusters_match_iid(scores in prop::collection::vec(-10.0f64..10.0, 2..50)) {
            let n = scores.len();
            let s = DependenceStructure::one_way((0..n).collect());
            let cr = variance(&scores, &s, VarianceMethod::ClusterRobust).unwrap();
            let iid = variance(&scores, &DependenceStructure::Independent { n }, VarianceMethod::Iid).unwrap();
            prop_assert!((cr.sigma2 - iid.sigma2).abs() <= 1e-9 * iid.sigma2.max(1.0));
        }
    }
}
