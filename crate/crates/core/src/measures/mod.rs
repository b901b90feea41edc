//! Probability measures and the distances between them.
//!
//! Two concrete representations are used throughout: weighted atoms
//! ([`EmpiricalMeasure`]) and cell-averaged densities on a uniform 1D grid
//! ([`GridDensity1D`]). Balls are always closed.

mod assignment;
mod discrepancy;
mod rates;
mod wasserstein;

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::ParticleEnsemble;
use crate::neighbors::distance;

pub use assignment::{solve_assignment, Assignment};
pub use discrepancy::{discrepancy_1d, discrepancy_candidates};
pub use rates::{check_dw1, fournier_rate, Dw1Report, RateReport};
pub use wasserstein::{wasserstein1_1d, wasserstein1_assignment};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("negative radius {0}")]
    NegativeRadius(f64),
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("assignment requires {0}")]
    Assignment(String),
    #[error("support mismatch: {0}")]
    Support(String),
    #[error("rate requires n >= 2, got {0}")]
    RateDomain(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Anything that can report the mass of a closed ball `B_r(center)`.
pub trait SpatialMeasure {
    fn dim(&self) -> usize;
    fn ball_mass_unchecked(&self, center: &[f64], radius: f64) -> f64;
}

/// Mass of the closed ball of `radius` around `center`.
pub fn ball_mass<M: SpatialMeasure + ?Sized>(measure: &M, center: &[f64], radius: f64) -> Result<f64, MeasureError> {
    if center.len() != measure.dim() {
        return Err(MeasureError::Dimension(center.len(), measure.dim()));
    }
    if !(radius >= 0.0) {
        return Err(MeasureError::NegativeRadius(radius));
    }
    Ok(measure.ball_mass_unchecked(center, radius))
}

/// Weighted atoms in `R^d`. Uniform measures keep exact `count / len` masses.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 || !points.len().is_multiple_of(dim) || points.len() / dim != weights.len() || weights.is_empty() {
            return Err(MeasureError::Invalid(format!(
                "{} coordinates and {} weights do not describe atoms in dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(MeasureError::Invalid("non-finite atom coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MeasureError::Invalid("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::Invalid(format!("weights sum to {total}, expected 1")));
        }
        let uniform = weights.iter().all(|&w| w == weights[0]);
        Ok(Self {
            dim,
            points,
            weights,
            uniform,
        })
    }

    /// Equal weights `1/M` on every atom.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(MeasureError::Invalid(format!(
                "{} coordinates do not describe atoms in dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(MeasureError::Invalid("non-finite atom coordinate".into()));
        }
        let m = points.len() / dim;
        Ok(Self {
            dim,
            points,
            weights: vec![1.0 / m as f64; m],
            uniform: true,
        })
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self {
            dim: point.len(),
            points: point.to_vec(),
            weights: vec![1.0],
            uniform: true,
        }
    }

    /// Spatial marginal of the ensemble's empirical measure.
    pub fn spatial(ensemble: &ParticleEnsemble) -> Self {
        Self::uniform(ensemble.dim(), ensemble.positions().to_vec()).expect("ensembles are finite and non-empty")
    }

    /// Empirical measure on phase space `R^{2d}`, atoms `(x_i, v_i)`.
    pub fn phase(ensemble: &ParticleEnsemble) -> Self {
        let d = ensemble.dim();
        let mut pts = Vec::with_capacity(2 * ensemble.positions().len());
        for i in 0..ensemble.len() {
            pts.extend_from_slice(ensemble.position(i));
            pts.extend_from_slice(ensemble.velocity(i));
        }
        Self::uniform(2 * d, pts).expect("ensembles are finite and non-empty")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// CSV with header `x0..x{d-1},w`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MeasureError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        header.push("w".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|x| x.to_string()).collect();
            row.push(self.weights[i].to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, MeasureError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        let dim = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..dim).map(|k| format!("x{k}")).chain(["w".to_string()]).collect();
        if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(MeasureError::Parse(format!("unexpected header {:?}", header)));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| MeasureError::Parse(format!("bad number {field:?}")))?;
                if k < dim {
                    points.push(v);
                } else {
                    weights.push(v);
                }
            }
        }
        Self::new(dim, points, weights)
    }
}

fn csv_err(e: csv::Error) -> MeasureError {
    MeasureError::Parse(e.to_string())
}

impl SpatialMeasure for EmpiricalMeasure {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ball_mass_unchecked(&self, center: &[f64], radius: f64) -> f64 {
        let inside = (0..self.len()).filter(|&i| distance(center, self.point(i)) <= radius);
        if self.uniform {
            inside.count() as f64 / self.len() as f64
        } else {
            inside.map(|i| self.weights[i]).sum()
        }
    }
}

/// Piecewise-constant probability density on `[x_min, x_max]` with `cells` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDensityRepr", into = "GridDensityRepr")]
pub struct GridDensity1D {
    x_min: f64,
    x_max: f64,
    values: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridDensityRepr {
    x_min: f64,
    x_max: f64,
    values: Vec<f64>,
}

impl TryFrom<GridDensityRepr> for GridDensity1D {
    type Error = MeasureError;
    fn try_from(r: GridDensityRepr) -> Result<Self, Self::Error> {
        GridDensity1D::new(r.x_min, r.x_max, r.values)
    }
}

impl From<GridDensity1D> for GridDensityRepr {
    fn from(g: GridDensity1D) -> Self {
        GridDensityRepr {
            x_min: g.x_min,
            x_max: g.x_max,
            values: g.values,
        }
    }
}

impl GridDensity1D {
    /// Validates cell averages; total mass must be 1 within `1e-10`.
    pub fn new(x_min: f64, x_max: f64, values: Vec<f64>) -> Result<Self, MeasureError> {
        let g = Self::unnormalized(x_min, x_max, values)?;
        let total = *g.cdf.last().unwrap();
        if (total - 1.0).abs() > 1e-10 {
            return Err(MeasureError::Invalid(format!("density has mass {total}, expected 1")));
        }
        Ok(g)
    }

    /// Rescales non-negative cell values to unit mass.
    pub fn normalized(x_min: f64, x_max: f64, values: Vec<f64>) -> Result<Self, MeasureError> {
        let g = Self::unnormalized(x_min, x_max, values)?;
        let total = *g.cdf.last().unwrap();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MeasureError::Invalid("density has no mass to normalize".into()));
        }
        let values = g.values.iter().map(|v| v / total).collect();
        Self::unnormalized(x_min, x_max, values)
    }

    /// Uniform density on `[lo, hi]`, one cell.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, MeasureError> {
        Self::new(lo, hi, vec![1.0 / (hi - lo)])
    }

    fn unnormalized(x_min: f64, x_max: f64, values: Vec<f64>) -> Result<Self, MeasureError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(MeasureError::Invalid(format!("bad grid interval [{x_min}, {x_max}]")));
        }
        if values.is_empty() {
            return Err(MeasureError::Invalid("grid needs at least one cell".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MeasureError::Invalid("cell values must be finite and non-negative".into()));
        }
        let dx = (x_max - x_min) / values.len() as f64;
        let mut cdf = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for v in &values {
            acc += v * dx;
            cdf.push(acc);
        }
        Ok(Self {
            x_min,
            x_max,
            values,
            cdf,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells() as f64
    }

    /// Left edge of cell `k` (`k = cells` gives `x_max`).
    pub fn edge(&self, k: usize) -> f64 {
        if k == self.cells() {
            self.x_max
        } else {
            self.x_min + (self.x_max - self.x_min) * (k as f64 / self.cells() as f64)
        }
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.edge(k) + self.edge(k + 1))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    /// Cumulative distribution `rho((-inf, x])`, continuous and piecewise linear.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.x_min {
            return 0.0;
        }
        if x >= self.x_max {
            return self.total_mass();
        }
        let k = (((x - self.x_min) / self.dx()) as usize).min(self.cells() - 1);
        let v = self.cdf[k] + self.values[k] * (x - self.edge(k));
        v.clamp(self.cdf[k], self.cdf[k + 1])
    }

    /// Mass of `[a, b]`.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b < a {
            0.0
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = rng.gen::<f64>() * self.total_mass();
        let k = (self.cdf.partition_point(|&c| c <= u).max(1) - 1).min(self.cells() - 1);
        let dens = self.values[k];
        if dens <= 0.0 {
            return self.center(k);
        }
        let x = self.edge(k) + (u - self.cdf[k]) / dens;
        x.clamp(self.edge(k), self.edge(k + 1))
    }

    /// Cell averages of `density` computed from its exact antiderivative,
    /// then normalized.
    pub fn from_antiderivative<F: Fn(f64) -> f64>(x_min: f64, x_max: f64, cells: usize, antiderivative: F) -> Result<Self, MeasureError> {
        if cells == 0 {
            return Err(MeasureError::Invalid("grid needs at least one cell".into()));
        }
        let probe = Self::unnormalized(x_min, x_max, vec![0.0; cells])?;
        let dx = probe.dx();
        let values = (0..cells)
            .map(|k| ((antiderivative(probe.edge(k + 1)) - antiderivative(probe.edge(k))) / dx).max(0.0))
            .collect();
        Self::normalized(x_min, x_max, values)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), MeasureError> {
        serde_json::to_writer_pretty(out, self).map_err(|e| MeasureError::Parse(e.to_string()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, MeasureError> {
        serde_json::from_reader(input).map_err(|e| MeasureError::Parse(e.to_string()))
    }
}

impl SpatialMeasure for GridDensity1D {
    fn dim(&self) -> usize {
        1
    }

    /// `F(x + r) - F(x - r)`; the density has no atoms, so both closed and
    /// open endpoints give the same value.
    fn ball_mass_unchecked(&self, center: &[f64], radius: f64) -> f64 {
        self.interval_mass(center[0] - radius, center[0] + radius)
    }
}

/// A one-dimensional measure: atoms or a grid density.
#[derive(Debug, Clone, Copy)]
pub enum Measure1D<'a> {
    Atoms(&'a EmpiricalMeasure),
    Grid(&'a GridDensity1D),
}

impl<'a> From<&'a EmpiricalMeasure> for Measure1D<'a> {
    fn from(m: &'a EmpiricalMeasure) -> Self {
        Measure1D::Atoms(m)
    }
}

impl<'a> From<&'a GridDensity1D> for Measure1D<'a> {
    fn from(m: &'a GridDensity1D) -> Self {
        Measure1D::Grid(m)
    }
}

impl Measure1D<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Measure1D::Atoms(m) => m.dim,
            Measure1D::Grid(_) => 1,
        }
    }
}

/// CDF evaluator with left and right limits.
pub(crate) enum Cdf1D<'a> {
    Atoms { xs: Vec<f64>, cum: Vec<f64> },
    Grid(&'a GridDensity1D),
}

impl<'a> Cdf1D<'a> {
    pub(crate) fn new(m: Measure1D<'a>) -> Result<Self, MeasureError> {
        match m {
            Measure1D::Grid(g) => Ok(Cdf1D::Grid(g)),
            Measure1D::Atoms(e) => {
                if e.dim != 1 {
                    return Err(MeasureError::Dimension(e.dim, 1));
                }
                let mut order: Vec<usize> = (0..e.len()).collect();
                order.sort_by(|&a, &b| e.points[a].total_cmp(&e.points[b]).then(a.cmp(&b)));
                let xs: Vec<f64> = order.iter().map(|&i| e.points[i]).collect();
                let n = e.len();
                let cum = if e.uniform {
                    (0..=n).map(|k| k as f64 / n as f64).collect()
                } else {
                    let mut c = Vec::with_capacity(n + 1);
                    let mut acc = 0.0;
                    c.push(0.0);
                    for &i in &order {
                        acc += e.weights[i];
                        c.push(acc);
                    }
                    c
                };
                Ok(Cdf1D::Atoms { xs, cum })
            }
        }
    }

    pub(crate) fn push_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Cdf1D::Atoms { xs, .. } => out.extend_from_slice(xs),
            Cdf1D::Grid(g) => out.extend((0..=g.cells()).map(|k| g.edge(k))),
        }
    }

    /// `mu((-inf, x])`.
    pub(crate) fn right(&self, x: f64) -> f64 {
        match self {
            Cdf1D::Atoms { xs, cum } => cum[xs.partition_point(|&p| p <= x)],
            Cdf1D::Grid(g) => g.cdf(x),
        }
    }

    /// `mu((-inf, x))`.
    pub(crate) fn left(&self, x: f64) -> f64 {
        match self {
            Cdf1D::Atoms { xs, cum } => cum[xs.partition_point(|&p| p < x)],
            Cdf1D::Grid(g) => g.cdf(x),
        }
    }
}

/// Sorted, deduplicated union of both measures' breakpoints.
pub(crate) fn merged_breakpoints(a: &Cdf1D, b: &Cdf1D) -> Vec<f64> {
    let mut pts = Vec::new();
    a.push_breakpoints(&mut pts);
    b.push_breakpoints(&mut pts);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
