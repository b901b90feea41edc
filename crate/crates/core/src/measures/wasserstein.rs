use super::assignment::solve_assignment;
use super::{merged_breakpoints, Cdf1D, EmpiricalMeasure, Measure1D, MeasureError};
use crate::neighbors::distance;

/// Exact `W1 = int |F_mu - F_nu| dx` for one-dimensional atoms or grid densities.
pub fn wasserstein1_1d<'a, 'b>(
    mu: impl Into<Measure1D<'a>>,
    nu: impl Into<Measure1D<'b>>,
) -> Result<f64, MeasureError> {
    let (mu, nu) = (mu.into(), nu.into());
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(MeasureError::Dimension(m.dim(), 1));
        }
    }
    let (f, g) = (Cdf1D::new(mu)?, Cdf1D::new(nu)?);
    let pts = merged_breakpoints(&f, &g);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (p, q) = (w[0], w[1]);
        // Both CDFs are affine on (p, q).
        let a = f.right(p) - g.right(p);
        let b = f.left(q) - g.left(q);
        total += abs_linear_integral(a, b, q - p);
    }
    Ok(total)
}

/// `int_0^h |a + (b - a) s / h| ds`.
fn abs_linear_integral(a: f64, b: f64, h: f64) -> f64 {
    if (a >= 0.0) == (b >= 0.0) || a == 0.0 || b == 0.0 {
        0.5 * h * (a.abs() + b.abs())
    } else {
        0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// Exact `W1` between equal-size uniform empirical measures in any dimension.
pub fn wasserstein1_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64, MeasureError> {
    if mu.dim != nu.dim {
        return Err(MeasureError::Dimension(mu.dim, nu.dim));
    }
    if mu.len() != nu.len() {
        return Err(MeasureError::Assignment(format!(
            "equal point counts, got {} and {}",
            mu.len(),
            nu.len()
        )));
    }
    if !(mu.is_uniform() && nu.is_uniform()) {
        return Err(MeasureError::Assignment("uniform weights".into()));
    }
    let n = mu.len();
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| distance(mu.point(i), nu.point(j))))
        .collect();
    let sol = solve_assignment(n, &cost);
    let sum: f64 = (0..n).map(|i| cost[i * n + sol.row_to_col[i]]).sum();
    Ok(sum / n as f64)
}
