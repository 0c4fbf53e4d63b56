use serde::Serialize;

use super::linear::column_means;
use crate::matrix::Matrix;

/// One-nearest-neighbor interpolator on standardized features. It reproduces
/// every training label exactly, which makes it the canonical learner whose
/// in-sample fit says nothing about out-of-sample error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearestNeighbor {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub points: Matrix,
    pub labels: Vec<f64>,
}

impl NearestNeighbor {
    pub fn fit(x: &Matrix, y: &[f64]) -> Self {
        let center = column_means(x);
        let n = x.nrows() as f64;
        let scale: Vec<f64> = (0..x.ncols())
            .map(|j| {
                let var = x.rows_iter().map(|r| (r[j] - center[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        let mut points = x.clone();
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                points.set(i, j, (x.get(i, j) - center[j]) / scale[j]);
            }
        }
        Self { center, scale, points, labels: y.to_vec() }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let p = x.ncols();
        let mut query = vec![0.0; p];
        x.rows_iter()
            .map(|r| {
                for j in 0..p {
                    query[j] = (r[j] - self.center[j]) / self.scale[j];
                }
                let mut best = (f64::INFINITY, 0usize);
                for (i, pt) in self.points.rows_iter().enumerate() {
                    let mut d = 0.0;
                    for j in 0..p {
                        let diff = pt[j] - query[j];
                        d += diff * diff;
                        if d >= best.0 {
                            break;
                        }
                    }
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                self.labels[best.1]
            })
            .collect()
    }
}
