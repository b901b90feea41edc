use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("ensemble must contain at least one agent")]
    Empty,
    #[error("positions ({positions}) and velocities ({velocities}) lengths are incompatible with dim {dim}")]
    Shape {
        dim: usize,
        positions: usize,
        velocities: usize,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

/// `N` agents in phase space `R^d x R^d`, stored row-major (`N x d`).
///
/// Doubles as the uniform empirical measure on the agents' phase points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self, EnsembleError> {
        if dim == 0 {
            return Err(EnsembleError::ZeroDim);
        }
        if positions.len() != velocities.len() || !positions.len().is_multiple_of(dim) {
            return Err(EnsembleError::Shape {
                dim,
                positions: positions.len(),
                velocities: velocities.len(),
            });
        }
        if positions.is_empty() {
            return Err(EnsembleError::Empty);
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(EnsembleError::NonFinite("positions"));
        }
        if velocities.iter().any(|x| !x.is_finite()) {
            return Err(EnsembleError::NonFinite("velocities"));
        }
        Ok(Self {
            dim,
            positions,
            velocities,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn from_1d(positions: &[f64], velocities: &[f64]) -> Result<Self, EnsembleError> {
        Self::new(1, positions.to_vec(), velocities.to_vec())
    }

    pub(crate) fn from_parts_unchecked(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Self {
        debug_assert_eq!(positions.len(), velocities.len());
        Self {
            dim,
            positions,
            velocities,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.velocities).all(|x| x.is_finite())
    }

    pub fn max_speed(&self) -> f64 {
        max_norm(&self.velocities, self.dim)
    }

    pub fn max_radius(&self) -> f64 {
        max_norm(&self.positions, self.dim)
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for v in self.velocities.chunks_exact(self.dim) {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Smallest box `|x_i| <= r_x`, `|v_i| <= r_v` containing the ensemble.
    pub fn support_box(&self) -> SupportBox {
        SupportBox {
            r_x: self.max_radius(),
            r_v: self.max_speed(),
        }
    }

    /// Relabels agents: agent `k` of the result is agent `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let d = self.dim;
        let mut x = Vec::with_capacity(self.positions.len());
        let mut v = Vec::with_capacity(self.velocities.len());
        for &p in perm {
            x.extend_from_slice(self.position(p));
            v.extend_from_slice(self.velocity(p));
        }
        Self::from_parts_unchecked(d, x, v)
    }
}

fn max_norm(data: &[f64], dim: usize) -> f64 {
    data.chunks_exact(dim)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Radii of a phase-space box `B_{r_x} x B_{r_v}` holding a support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub r_x: f64,
    pub r_v: f64,
}

impl SupportBox {
    /// Spatial radius bound at time `t`: `r_x + t r_v`.
    pub fn spatial_bound(&self, t: f64) -> f64 {
        self.r_x + t * self.r_v
    }
}
