use serde::{Deserialize, Serialize};

use crate::discretization::quantile_sorted;
use crate::error::{invalid, Error, Result};

/// Median, mean and sample standard deviation (`n − 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
}

/// Standard deviation of a singleton is reported as 0.
pub fn summarize(xs: &[f64]) -> Result<Summary> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("cannot summarize an empty sample".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(Summary { median: percentile(xs, 0.5)?, mean, std })
}

/// Linear-interpolation percentile, `p ∈ [0, 1]`.
pub fn percentile(xs: &[f64], p: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("cannot take a percentile of an empty sample".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

/// Trailing moving average. The first `window − 1` points average over the
/// prefix that exists so far.
pub fn smooth_curve(xs: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(invalid("smoothing window must be at least 1"));
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    Ok(out)
}

/// Element-wise mean of equally long curves.
pub fn average_curves(curves: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = curves.first() else { return Vec::new() };
    (0..first.len())
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
        .collect()
}
