use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for the weight `exp(-x^2)`, via the Golub–Welsch
/// eigenproblem. Nodes ascend.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], sqrt_pi * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Rule for expectations under a standard normal: `E f(Z) ~ sum w_i f(z_i)`.
pub fn standard_normal_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_hermite(order);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    (
        x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
        w.iter().map(|v| v / sqrt_pi).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_moments() {
        let (z, w) = standard_normal_rule(20);
        let moment = |k: i32| z.iter().zip(&w).map(|(z, w)| w * z.powi(k)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-12);
        assert!(moment(1).abs() < 1e-12);
        assert!((moment(2) - 1.0).abs() < 1e-12);
        assert!((moment(4) - 3.0).abs() < 1e-10);
        assert!((moment(6) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_expectation() {
        // E cos(Z) = exp(-1/2)
        let (z, w) = standard_normal_rule(20);
        let e: f64 = z.iter().zip(&w).map(|(z, w)| w * z.cos()).sum();
        assert!((e - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_hermite(2);
        assert!((x[1] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((w[0] - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }
}
