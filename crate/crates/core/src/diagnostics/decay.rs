//! Power-law exponents fitted on log–log axes.

use crate::error::{CoreError, Result};
use crate::optim::RunTrace;
use crate::scalar::Scalar;

/// Least-squares slope of `ln v` against `ln t`.
pub fn loglog_slope<T: Scalar>(ts: &[usize], values: &[T]) -> Result<T> {
    if ts.len() != values.len() || ts.len() < 2 {
        return Err(CoreError::InvalidData(
            "need at least two (t, value) pairs of equal length".into(),
        ));
    }
    if ts.iter().any(|&t| t == 0) || values.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(CoreError::InvalidData("log-log fit needs positive t and values".into()));
    }
    let lx: Vec<f64> = ts.iter().map(|&t| (t as f64).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.as_f64().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(CoreError::InvalidData("all checkpoints coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(T::lit(sxy / sxx))
}

/// Seed-averaged tracking error at each checkpoint.
pub fn mean_tracking_error<T: Scalar>(traces: &[RunTrace<T>], checkpoints: &[usize]) -> Result<Vec<T>> {
    if traces.is_empty() {
        return Err(CoreError::InvalidData("no traces".into()));
    }
    checkpoints
        .iter()
        .map(|&t| {
            let mut sum = T::zero();
            for tr in traces {
                sum = sum
                    + tr.row_at(t).and_then(|r| r.tracking_err).ok_or_else(|| {
                        CoreError::InvalidData(format!("no tracking error recorded at t = {t}"))
                    })?;
            }
            Ok(sum / T::from_count(traces.len()))
        })
        .collect()
}

/// Decay exponent of the seed-averaged tracking error over `checkpoints`.
pub fn decay_exponent_fit<T: Scalar>(traces: &[RunTrace<T>], checkpoints: &[usize]) -> Result<T> {
    loglog_slope(checkpoints, &mean_tracking_error(traces, checkpoints)?)
}
