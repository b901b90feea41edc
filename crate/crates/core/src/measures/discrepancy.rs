use super::{merged_breakpoints, Cdf1D, EmpiricalMeasure, Measure1D, MeasureError};
use crate::neighbors::distance;

/// `sup_{[a,b]} |mu([a,b]) - nu([a,b])|` over closed intervals, exactly.
///
/// With `H = F_mu - F_nu`, the mass difference of `[a, b]` is
/// `H(b) - H(a-)`. `H` is piecewise affine between breakpoints, so the
/// supremum is the spread of `H` over both one-sided limits at every
/// breakpoint (and the value 0 far to the left).
pub fn discrepancy_1d<'a, 'b>(mu: impl Into<Measure1D<'a>>, nu: impl Into<Measure1D<'b>>) -> Result<f64, MeasureError> {
    let (mu, nu) = (mu.into(), nu.into());
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(MeasureError::Dimension(m.dim(), 1));
        }
    }
    let (f, g) = (Cdf1D::new(mu)?, Cdf1D::new(nu)?);
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for p in merged_breakpoints(&f, &g) {
        for h in [f.left(p) - g.left(p), f.right(p) - g.right(p)] {
            lo = lo.min(h);
            hi = hi.max(h);
        }
    }
    Ok((hi - lo).clamp(0.0, 1.0))
}

/// Lower bound on the discrepancy between empirical measures in `d >= 2`.
///
/// Every candidate center is swept over all radii at once. Centers:
/// the atoms of both measures (`refine = 0`), plus pairwise midpoints
/// (`refine >= 1`), plus circumcenters of atom triples together with
/// centers nudged by `2^-40 * diameter` toward and away from each triple
/// member (`refine >= 2`). In the plane the `refine >= 2` set contains an
/// optimal ball for every achievable subset, so the bound is attained up
/// to rounding; in higher dimensions it stays a lower bound.
pub fn discrepancy_candidates(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, refine: u32) -> Result<f64, MeasureError> {
    if mu.dim != nu.dim {
        return Err(MeasureError::Dimension(mu.dim, nu.dim));
    }
    let d = mu.dim;
    let sweep = Sweep::new(mu, nu);
    let pts: Vec<&[f64]> = (0..mu.len()).map(|i| mu.point(i)).chain((0..nu.len()).map(|i| nu.point(i))).collect();
    let mut scratch = Vec::with_capacity(pts.len());
    let mut best = 0.0f64;
    for p in &pts {
        best = best.max(sweep.best_at(p, &mut scratch));
    }
    if refine >= 1 {
        let mut c = vec![0.0; d];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                for k in 0..d {
                    c[k] = 0.5 * (pts[i][k] + pts[j][k]);
                }
                best = best.max(sweep.best_at(&c, &mut scratch));
            }
        }
    }
    if refine >= 2 {
        let diam = pts
            .iter()
            .flat_map(|a| pts.iter().map(move |b| distance(a, b)))
            .fold(0.0, f64::max);
        let eta = diam * 2f64.powi(-40);
        let mut moved = vec![0.0; d];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                for k in j + 1..pts.len() {
                    let Some(c) = circumcenter(pts[i], pts[j], pts[k]) else {
                        continue;
                    };
                    best = best.max(sweep.best_at(&c, &mut scratch));
                    for q in [pts[i], pts[j], pts[k]] {
                        let r = distance(&c, q);
                        if r == 0.0 {
                            continue;
                        }
                        for sign in [1.0, -1.0] {
                            for t in 0..d {
                                moved[t] = c[t] + sign * eta * (c[t] - q[t]) / r;
                            }
                            best = best.max(sweep.best_at(&moved, &mut scratch));
                        }
                    }
                }
            }
        }
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Center of the circle through three points, in their affine plane.
fn circumcenter(a: &[f64], b: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    let u: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let w: Vec<f64> = c.iter().zip(a).map(|(x, y)| x - y).collect();
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let uw: f64 = u.iter().zip(&w).map(|(x, y)| x * y).sum();
    let det = uu * ww - uw * uw;
    if !(det > 1e-14 * uu * ww) {
        return None;
    }
    let alpha = 0.5 * ww * (uu - uw) / det;
    let beta = 0.5 * uu * (ww - uw) / det;
    Some((0..a.len()).map(|k| a[k] + alpha * u[k] + beta * w[k]).collect())
}

struct Sweep<'a> {
    mu: &'a EmpiricalMeasure,
    nu: &'a EmpiricalMeasure,
}

impl<'a> Sweep<'a> {
    fn new(mu: &'a EmpiricalMeasure, nu: &'a EmpiricalMeasure) -> Self {
        Self { mu, nu }
    }

    /// Largest `|mu(B) - nu(B)|` over closed balls `B` centered at `c`.
    fn best_at(&self, c: &[f64], scratch: &mut Vec<(f64, bool, usize)>) -> f64 {
        scratch.clear();
        scratch.extend((0..self.mu.len()).map(|i| (distance(c, self.mu.point(i)), true, i)));
        scratch.extend((0..self.nu.len()).map(|i| (distance(c, self.nu.point(i)), false, i)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc_mu = Mass::new(self.mu);
        let mut acc_nu = Mass::new(self.nu);
        let mut best = 0.0f64;
        let mut k = 0;
        while k < scratch.len() {
            let r = scratch[k].0;
            while k < scratch.len() && scratch[k].0 == r {
                let (_, from_mu, i) = scratch[k];
                if from_mu {
                    acc_mu.add(i);
                } else {
                    acc_nu.add(i);
                }
                k += 1;
            }
            best = best.max((acc_mu.value() - acc_nu.value()).abs());
        }
        best
    }
}

/// Running mass of a set of atoms; exact counts for uniform measures.
struct Mass<'a> {
    m: &'a EmpiricalMeasure,
    count: usize,
    sum: f64,
}

impl<'a> Mass<'a> {
    fn new(m: &'a EmpiricalMeasure) -> Self {
        Self { m, count: 0, sum: 0.0 }
    }

    fn add(&mut self, i: usize) {
        self.count += 1;
        self.sum += self.m.weights[i];
    }

    fn value(&self) -> f64 {
        if self.m.is_uniform() {
            self.count as f64 / self.m.len() as f64
        } else {
            self.sum
        }
    }
}
