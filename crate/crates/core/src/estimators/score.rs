use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    /// `E[m(a, L)]` for the given arm.
    CounterfactualMean(u8),
    /// `E[m(1, L) - m(0, L)]`.
    Ate,
}

impl Estimand {
    pub fn label(self) -> String {
        match self {
            Estimand::CounterfactualMean(a) => format!("mean_{a}"),
            Estimand::Ate => "ate".into(),
        }
    }
}

/// Nuisance predictions for one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitNuisance {
    pub m0: f64,
    pub m1: f64,
    /// `g(1 | L)`.
    pub g1: f64,
}

/// One-step (AIPW) score for the counterfactual mean at arm `a`:
/// `m(a, L) + 1{A = a} / g(a | L) * (Y - m(A, L))`.
pub fn aipw_score(a: u8, nu: UnitNuisance, treatment: u8, outcome: f64) -> Result<f64> {
    if !(nu.g1 > 0.0 && nu.g1 < 1.0) {
        return Err(Error::InvalidPropensity(nu.g1));
    }
    let (m_a, g_a) = if a == 1 { (nu.m1, nu.g1) } else { (nu.m0, 1.0 - nu.g1) };
    let m_obs = if treatment == 1 { nu.m1 } else { nu.m0 };
    let weight = if treatment == a { 1.0 / g_a } else { 0.0 };
    Ok(m_a + weight * (outcome - m_obs))
}

pub fn estimand_score(estimand: Estimand, nu: UnitNuisance, treatment: u8, outcome: f64) -> Result<f64> {
    match estimand {
        Estimand::CounterfactualMean(a) => aipw_score(a, nu, treatment, outcome),
        Estimand::Ate => Ok(aipw_score(1, nu, treatment, outcome)? - aipw_score(0, nu, treatment, outcome)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let nu = UnitNuisance { m0: 1.0, m1: 2.0, g1: 0.5 };
        assert_eq!(aipw_score(1, nu, 1, 3.0).unwrap(), 4.0);
        assert_eq!(aipw_score(0, nu, 1, 3.0).unwrap(), 1.0);
        assert_eq!(estimand_score(Estimand::Ate, nu, 1, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn zero_residual_returns_plug_in() {
        let nu = UnitNuisance { m0: -0.7, m1: 2.5, g1: 0.3 };
        assert_eq!(aipw_score(1, nu, 1, 2.5).unwrap(), 2.5);
        assert_eq!(aipw_score(0, nu, 0, -0.7).unwrap(), -0.7);
    }

    #[test]
    fn propensity_must_be_interior() {
        for g1 in [0.0, 1.0, -0.1, f64::NAN] {
            let nu = UnitNuisance { m0: 0.0, m1: 0.0, g1 };
            assert!(matches!(aipw_score(1, nu, 1, 0.0), Err(Error::InvalidPropensity(_))));
        }
    }

    #[test]
    fn estimand_json() {
        assert_eq!(serde_json::to_string(&Estimand::Ate).unwrap(), r#""ate""#);
        let e: Estimand = serde_json::from_str(r#"{"counterfactual_mean":1}"#).unwrap();
        assert_eq!(e, Estimand::CounterfactualMean(1));
    }
}
