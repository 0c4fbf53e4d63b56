use crossfit::dgp::{DgpSpec, Oracle, SizeSpec};
use crossfit::estimators::{crossfit_estimate, Estimand, NuisanceModel, NuisanceStrategy, VarianceMethod};
use crossfit::matrix::Matrix;
use crossfit::splitters::as_independent_split;
use crossfit::Result;

/// Keeps one oracle nuisance and replaces the other with a wrong constant.
struct HalfOracle {
    oracle: Oracle,
    keep_outcome: bool,
}

impl NuisanceModel for HalfOracle {
    fn outcome(&self, x: &Matrix, a: u8) -> Result<Vec<f64>> {
        if self.keep_outcome {
            self.oracle.outcome(x, a)
        } else {
            Ok(vec![5.0; x.nrows()])
        }
    }

    fn propensity(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.keep_outcome {
            Ok(vec![0.5; x.nrows()])
        } else {
            self.oracle.propensity(x)
        }
    }
}

fn replicate_estimates(keep_outcome: bool, reps: usize) -> (f64, f64) {
    let dgp = DgpSpec::independent();
    let strategy = NuisanceStrategy::fixed(HalfOracle { oracle: dgp.oracle(), keep_outcome });
    let est: Vec<f64> = (0..reps)
        .map(|r| {
            let d = dgp.generate(SizeSpec::Units(400), 1000 + r as u64).unwrap();
            let plan = as_independent_split(400, 2, r as u64).unwrap();
            crossfit_estimate(&d.table, &d.structure, &plan, &strategy, Estimand::Ate, VarianceMethod::Iid).unwrap().0.estimate
        })
        .collect();
    let mean = est.iter().sum::<f64>() / reps as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    (mean, (var / reps as f64).sqrt())
}

#[test]
fn doubly_robust_with_true_outcome_and_wrong_propensity() {
    let (mean, se) = replicate_estimates(true, 300);
    let truth = DgpSpec::independent().true_psi(Estimand::Ate).unwrap();
    assert!((mean - truth).abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn doubly_robust_with_true_propensity_and_wrong_outcome() {
    let (mean, se) = replicate_estimates(false, 300);
    let truth = DgpSpec::independent().true_psi(Estimand::Ate).unwrap();
    assert!((mean - truth).abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn oracle_crossfit_on_network_data_is_near_truth() {
    let dgp = DgpSpec::network();
    let d = dgp.generate(SizeSpec::Units(2000), 7).unwrap();
    let plan = as_independent_split(2000, 2, 7).unwrap();
    let strategy = NuisanceStrategy::fixed(dgp.oracle());
    let (r, scores) = crossfit_estimate(&d.table, &d.structure, &plan, &strategy, Estimand::Ate, VarianceMethod::NetworkHac).unwrap();
    assert_eq!(scores.values.len(), 2000);
    assert!((r.estimate - 0.368).abs() < 3.0 * r.se, "{} +- {}", r.estimate, r.se);
}
