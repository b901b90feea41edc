use rayon::prelude::*;

use super::MeanFieldError;
use crate::dynamics::{rk4_with, weight_table, Frame};
use crate::ensemble::ParticleEnsemble;
use crate::kernel::Kernel;
use crate::measures::{EmpiricalMeasure, MeasureError, SpatialMeasure};
use crate::neighbors::{distance, NeighborIndex, Scratch};

/// `W[rho, f](x, v) = int K(M[rho](x, |x - y|)) (w - v) df(y, w)`.
///
/// Atoms of `phase` (points in `R^{2d}`, position first) are visited by
/// ascending distance from `x`, ties by ascending index, and the rank of
/// each tie group is the closed-ball mass of `spatial`. When `spatial` and
/// `phase` come from the same ensemble this is the agent force, bit for bit.
pub fn mean_field_force<S: SpatialMeasure + ?Sized>(
    spatial: &S,
    phase: &EmpiricalMeasure,
    kernel: &Kernel,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, MeasureError> {
    let d = spatial.dim();
    if phase.point(0).len() != 2 * d {
        return Err(MeasureError::Dimension(phase.point(0).len(), 2 * d));
    }
    if x.len() != d || v.len() != d {
        return Err(MeasureError::Dimension(x.len().max(v.len()), d));
    }
    let m = phase.len();
    let mut order: Vec<(f64, usize)> = (0..m).map(|j| (distance(x, &phase.point(j)[..d]), j)).collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let uniform = phase.is_uniform();
    let mut acc = vec![0.0; d];
    let mut k = 0;
    while k < m {
        let r = order[k].0;
        let w = kernel.value(spatial.ball_mass_unchecked(x, r));
        while k < m && order[k].0 == r {
            let j = order[k].1;
            let wj = &phase.point(j)[d..];
            let c = if uniform { w } else { w * phase.weights()[j] };
            for t in 0..d {
                acc[t] += c * (wj[t] - v[t]);
            }
            k += 1;
        }
    }
    if uniform {
        let inv = 1.0 / m as f64;
        for a in acc.iter_mut() {
            *a *= inv;
        }
    }
    Ok(acc)
}

/// Alignment field generated by one frozen reference frame.
pub struct ReferenceField<'a> {
    reference: &'a ParticleEnsemble,
    index: NeighborIndex<'a>,
    sorted_vel: Vec<f64>,
    weights: Vec<f64>,
    kernel: Kernel,
}

impl<'a> ReferenceField<'a> {
    pub fn new(reference: &'a ParticleEnsemble, kernel: &Kernel) -> Self {
        let index = NeighborIndex::new(reference.dim(), reference.positions());
        let sorted_vel = if reference.dim() == 1 {
            index.line_order().iter().map(|&j| reference.velocities()[j]).collect()
        } else {
            Vec::new()
        };
        Self {
            reference,
            index,
            sorted_vel,
            weights: weight_table(kernel, reference.len()),
            kernel: *kernel,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Acceleration of a test particle at `(y, w)`; it does not count itself.
    pub fn accel_into(&self, y: &[f64], w: &[f64], scratch: &mut Scratch, out: &mut [f64]) {
        let m = self.reference.len();
        let inv = 1.0 / m as f64;
        if self.reference.dim() == 1 {
            let group = scratch.group_mut();
            out[0] = self.index.line_alignment_sum(y[0], w[0], &self.sorted_vel, &self.weights, group) * inv;
            return;
        }
        let d = self.reference.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut count = 0usize;
        self.index.for_each_tie_group(y, scratch, |_, group| {
            count += group.len();
            let c = self.weights[count];
            for &j in group {
                let vj = self.reference.velocity(j);
                for t in 0..d {
                    out[t] += c * (vj[t] - w[t]);
                }
            }
        });
        for o in out.iter_mut() {
            *o *= inv;
        }
    }

    /// Accelerations of every particle of `tests`, row-major.
    pub fn accelerations(&self, tests: &ParticleEnsemble) -> Vec<f64> {
        let d = tests.dim();
        let mut out = vec![0.0; tests.len() * d];
        out.par_chunks_mut(d)
            .enumerate()
            .for_each_init(Scratch::default, |scratch, (i, acc)| {
                self.accel_into(tests.position(i), tests.velocity(i), scratch, acc);
            });
        out
    }
}

/// Moves `tests` through the field of `reference`, frozen at each frame time
/// for all four RK4 stages. Frames must be `dt` apart (the last gap may be
/// shorter).
pub fn advect_in_reference_field(
    tests: &ParticleEnsemble,
    reference: &[Frame],
    kernel: &Kernel,
    dt: f64,
) -> Result<Vec<Frame>, MeanFieldError> {
    let Some(first) = reference.first() else {
        return Err(MeanFieldError::Frames("empty reference trajectory".into()));
    };
    if first.ensemble.dim() != tests.dim() {
        return Err(MeasureError::Dimension(tests.dim(), first.ensemble.dim()).into());
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MeanFieldError::Frames(format!("dt must be positive, got {dt}")));
    }
    let tol = 1e-9 * dt.max(first.t.abs());
    for (k, w) in reference.windows(2).enumerate() {
        let h = w[1].t - w[0].t;
        let last = k + 2 == reference.len();
        let ok = if last { h > 0.0 && h <= dt + tol } else { (h - dt).abs() <= tol };
        if !ok {
            return Err(MeanFieldError::Frames(format!(
                "frames {k} and {} are {h} apart, expected dt = {dt}",
                k + 1
            )));
        }
    }
    let mut out = Vec::with_capacity(reference.len());
    out.push(Frame {
        t: first.t,
        ensemble: tests.clone(),
    });
    for w in reference.windows(2) {
        let field = ReferenceField::new(&w[0].ensemble, kernel);
        let state = &out.last().unwrap().ensemble;
        let next = rk4_with(state, w[1].t - w[0].t, |s| field.accelerations(s));
        if !next.is_finite() {
            return Err(MeanFieldError::NonFinite(w[1].t));
        }
        out.push(Frame {
            t: w[1].t,
            ensemble: next,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, topological_rhs};
    use crate::measures::GridDensity1D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ParticleEnsemble {
        let x = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ParticleEnsemble::new(d, x, v).unwrap()
    }

    #[test]
    fn reproduces_agent_force_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = Kernel::affine(2.0, 1.5).unwrap();
        for d in 1..=3 {
            // Lattice positions force ties.
            let n = 24;
            let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-3..3) as f64 * 0.5).collect();
            let v: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = ParticleEnsemble::new(d, x, v).unwrap();
            let rhs = topological_rhs(&e, &k).unwrap();
            let (s, p) = (EmpiricalMeasure::spatial(&e), EmpiricalMeasure::phase(&e));
            for i in 0..n {
                let f = mean_field_force(&s, &p, &k, e.position(i), e.velocity(i)).unwrap();
                assert_eq!(f.as_slice(), &rhs[i * d..(i + 1) * d]);
            }
        }
    }

    #[test]
    fn aligned_and_constant_kernel_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = random_ensemble(&mut rng, 30, 2);
        let (s, p) = (EmpiricalMeasure::spatial(&e), EmpiricalMeasure::phase(&e));
        let k = Kernel::constant(0.7).unwrap();
        let mean = e.mean_velocity();
        let v = [0.2, -0.4];
        let f = mean_field_force(&s, &p, &k, &[0.1, 0.1], &v).unwrap();
        for t in 0..2 {
            assert!((f[t] - 0.7 * (mean[t] - v[t])).abs() < 1e-14);
        }
        let aligned = ParticleEnsemble::new(2, e.positions().to_vec(), [0.3, 0.3].repeat(30)).unwrap();
        let pa = EmpiricalMeasure::phase(&aligned);
        let f = mean_field_force(&s, &pa, &Kernel::affine(1.0, 0.5).unwrap(), &[0.0, 0.0], &[0.3, 0.3]).unwrap();
        assert_eq!(f, vec![0.0, 0.0]);
        assert!(mean_field_force(&s, &p, &k, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn grid_rank_with_weighted_atoms() {
        // Continuum rank from U[0,1]; atoms at 0.25 (v=1) and 0.75 (v=0), seen from (0.25, 0).
        let rho = GridDensity1D::uniform(0.0, 1.0).unwrap();
        let p = EmpiricalMeasure::new(2, vec![0.25, 1.0, 0.75, 0.0], vec![0.5, 0.5]).unwrap();
        let k = Kernel::affine(2.0, 1.0).unwrap();
        let f = mean_field_force(&rho, &p, &k, &[0.25], &[0.0]).unwrap();
        // Nearest atom: ball radius 0 has mass 0, K(0) = 2; weight 1/2, dv = 1.
        assert_eq!(f, vec![1.0]);
    }

    #[test]
    fn field_matches_force_for_outside_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = Kernel::exponential(1.5, 2.0).unwrap();
        for d in [1, 2] {
            let reference = random_ensemble(&mut rng, 40, d);
            let field = ReferenceField::new(&reference, &k);
            let (s, p) = (EmpiricalMeasure::spatial(&reference), EmpiricalMeasure::phase(&reference));
            let tests = random_ensemble(&mut rng, 10, d);
            let acc = field.accelerations(&tests);
            for i in 0..10 {
                let f = mean_field_force(&s, &p, &k, tests.position(i), tests.velocity(i)).unwrap();
                assert_eq!(f.as_slice(), &acc[i * d..(i + 1) * d]);
            }
        }
    }

    #[test]
    fn members_track_the_coupled_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = Kernel::affine(1.0, 0.5).unwrap();
        let e = random_ensemble(&mut rng, 50, 1);
        let mut prev = f64::INFINITY;
        for dt in [0.02, 0.01, 0.005] {
            let frames = simulate(&e, &k, dt, 0.5, 1).unwrap().frames;
            let adv = advect_in_reference_field(&e, &frames, &k, dt).unwrap();
            let last = &adv.last().unwrap().ensemble;
            let truth = &frames.last().unwrap().ensemble;
            let err = last
                .positions()
                .iter()
                .chain(last.velocities())
                .zip(truth.positions().iter().chain(truth.velocities()))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 0.5 * dt, "dt {dt}: {err}");
            assert!(err <= prev);
            prev = err;
        }
    }

    #[test]
    fn free_streaming_and_relaxation() {
        let k = Kernel::constant(1.0).unwrap();
        let reference = ParticleEnsemble::from_1d(&[0.0, 1.0, 2.0], &[0.5, 0.5, 0.5]).unwrap();
        let frames = simulate(&reference, &k, 0.01, 1.0, 1).unwrap().frames;
        let test = ParticleEnsemble::from_1d(&[-3.0], &[0.5]).unwrap();
        let adv = advect_in_reference_field(&test, &frames, &k, 0.01).unwrap();
        let end = &adv.last().unwrap().ensemble;
        assert!((end.positions()[0] - (-2.5)).abs() < 1e-12 && end.velocities()[0] == 0.5);

        // Reference at rest with mean 0.5: w(t) = 0.5 + (w0 - 0.5) e^{-t}.
        let moving = ParticleEnsemble::from_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        let frames = simulate(&moving, &k, 0.01, 1.0, 1).unwrap().frames;
        let test = ParticleEnsemble::from_1d(&[0.3], &[-1.0]).unwrap();
        let adv = advect_in_reference_field(&test, &frames, &k, 0.01).unwrap();
        for f in adv.iter().step_by(10) {
            let exact = 0.5 - 1.5 * (-f.t).exp();
            assert!((f.ensemble.velocities()[0] - exact).abs() < 1e-9, "t {}", f.t);
        }
    }

    #[test]
    fn rejects_mismatched_frames() {
        let k = Kernel::constant(1.0).unwrap();
        let e = ParticleEnsemble::from_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        let frames = simulate(&e, &k, 0.1, 1.0, 2).unwrap().frames;
        assert!(matches!(advect_in_reference_field(&e, &frames, &k, 0.1), Err(MeanFieldError::Frames(_))));
        assert!(advect_in_reference_field(&e, &[], &k, 0.1).is_err());
    }
}
