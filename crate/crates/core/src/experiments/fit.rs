use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("x and y lengths differ ({0} vs {1})")]
    Length(usize, usize),
    #[error("non-finite value in fit data")]
    NonFinite,
    #[error("all abscissae are equal")]
    Degenerate,
}

/// Least-squares line `y = slope * x + intercept`.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<FitResult, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::Length(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 || xs.iter().all(|&x| x == xs[0]) {
        return Err(FitError::Degenerate);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_res == 0.0 || ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(FitResult { slope, intercept, r_squared, n_points: n })
}

/// First index of `n_list` used in rate fits: the smallest `N` is dropped
/// once there are at least five sizes.
pub fn fit_window_start(len: usize) -> usize {
    usize::from(len >= 5)
}
