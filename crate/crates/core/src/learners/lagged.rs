use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lag window `ceil(T^(1/3))`, computed in integers.
pub fn lag_window(t: usize) -> usize {
    let mut w = (t as f64).cbrt().floor() as usize;
    while w * w * w < t {
        w += 1;
    }
    while w > 1 && (w - 1).pow(3) >= t {
        w -= 1;
    }
    w.max(1)
}

/// Design matrix of lagged covariates. Row `r` corresponds to time
/// `t = r + w` and holds `x[t-1], x[t-2], ..., x[t-w]` (each a full covariate
/// row), so the first `w` time points have no row.
pub fn build_lagged_features(series: &Matrix, w: usize) -> Result<Matrix> {
    let (t, p) = (series.nrows(), series.ncols());
    if w == 0 {
        return Err(Error::InvalidInput("lag window must be at least 1".into()));
    }
    if t <= w {
        return Err(Error::InvalidInput(format!("series length {t} must exceed the lag window {w}")));
    }
    let mut data = Vec::with_capacity((t - w) * p * w);
    for time in w..t {
        for lag in 1..=w {
            data.extend_from_slice(series.row(time - lag));
        }
    }
    Matrix::new(t - w, p * w, data)
}
