use serde::{Deserialize, Serialize};

use super::{discrepancy_1d, wasserstein1_1d, EmpiricalMeasure, GridDensity1D, MeasureError};

/// Expected `W1` sampling rate `C_d(N)` for `N` iid draws of a bounded density.
pub fn fournier_rate(n: usize, d: usize) -> Result<f64, MeasureError> {
    if n < 2 {
        return Err(MeasureError::RateDomain(n));
    }
    if d == 0 {
        return Err(MeasureError::Invalid("dimension must be at least 1".into()));
    }
    let n = n as f64;
    Ok(match d {
        1 => n.powf(-0.5),
        2 => n.powf(-0.5) * n.ln(),
        _ => n.powf(-1.0 / d as f64),
    })
}

/// Mean errors per `N` and their log-log fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n_values: Vec<usize>,
    pub mean_errors: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dw1Report {
    pub d_value: f64,
    pub w1_value: f64,
    pub sup_norm: f64,
    /// `d_value / sqrt(sup_norm * w1_value)`.
    pub ratio: f64,
}

/// Discrepancy and `W1` between atoms and a bounded density, plus the ratio
/// `D / sqrt(||rho||_inf W1)`.
pub fn check_dw1(nu: &EmpiricalMeasure, rho: &GridDensity1D) -> Result<Dw1Report, MeasureError> {
    if nu.dim != 1 {
        return Err(MeasureError::Dimension(nu.dim, 1));
    }
    if let Some(x) = nu.points().iter().find(|&&x| x < rho.x_min() || x > rho.x_max()) {
        return Err(MeasureError::Support(format!(
            "atom {x} outside the density domain [{}, {}]",
            rho.x_min(),
            rho.x_max()
        )));
    }
    let d_value = discrepancy_1d(nu, rho)?;
    let w1_value = wasserstein1_1d(nu, rho)?;
    let sup_norm = rho.sup_norm();
    let denom = (sup_norm * w1_value).sqrt();
    let ratio = if denom > 0.0 {
        d_value / denom
    } else if d_value == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Dw1Report {
        d_value,
        w1_value,
        sup_norm,
        ratio,
    })
}
