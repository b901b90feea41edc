//! Topological Cucker-Smale agent dynamics.
//!
//! Agent `i` aligns with every agent `j` through the weight `K(M_ij)`, where
//! `M_ij = #{k : |x_k - x_i| <= |x_j - x_i|} / N` is the inclusive rank of
//! `j` seen from `i` (self included). The force is piecewise constant in the
//! rank configuration, so the fixed-step RK4 integrator below loses formal
//! order on steps that straddle a rank crossing.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::ParticleEnsemble;
use crate::kernel::Kernel;
use crate::neighbors::{NeighborIndex, Scratch};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("agent index {index} out of range for {n} agents")]
    Index { index: usize, n: usize },
    #[error("invalid integration parameters: {0}")]
    Parameters(String),
    #[error("non-finite state produced in step ending at t = {t} (dt = {dt}); max speed before step {max_speed}")]
    NonFinite { t: f64, dt: f64, max_speed: f64 },
    #[error("non-finite input ensemble")]
    NonFiniteInput,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedNeighbor {
    pub index: usize,
    pub distance: f64,
    pub rank: f64,
}

/// Every agent seen from `center_index`, ordered by distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    pub center_index: usize,
    pub ordered_neighbors: Vec<RankedNeighbor>,
    pub tie_groups: Vec<Vec<usize>>,
}

pub fn rank_profile(ensemble: &ParticleEnsemble, i: usize) -> Result<RankProfile, DynamicsError> {
    let n = ensemble.len();
    if i >= n {
        return Err(DynamicsError::Index { index: i, n });
    }
    let index = NeighborIndex::new(ensemble.dim(), ensemble.positions());
    let mut scratch = Scratch::default();
    let mut ordered = Vec::with_capacity(n);
    let mut groups = Vec::new();
    let mut count = 0usize;
    index.for_each_tie_group(ensemble.position(i), &mut scratch, |d, group| {
        count += group.len();
        let rank = count as f64 / n as f64;
        ordered.extend(group.iter().map(|&j| RankedNeighbor {
            index: j,
            distance: d,
            rank,
        }));
        groups.push(group.to_vec());
    });
    Ok(RankProfile {
        center_index: i,
        ordered_neighbors: ordered,
        tie_groups: groups,
    })
}

/// Accelerations `(1/N) sum_j K(M_ij) (v_j - v_i)`, row-major `N x d`.
pub fn topological_rhs(ensemble: &ParticleEnsemble, kernel: &Kernel) -> Result<Vec<f64>, DynamicsError> {
    if !ensemble.is_finite() {
        return Err(DynamicsError::NonFiniteInput);
    }
    Ok(rhs_unchecked(ensemble, kernel))
}

fn rhs_unchecked(ensemble: &ParticleEnsemble, kernel: &Kernel) -> Vec<f64> {
    let n = ensemble.len();
    let d = ensemble.dim();
    let index = NeighborIndex::new(d, ensemble.positions());
    let inv_n = 1.0 / n as f64;
    if d == 1 {
        let weights = weight_table(kernel, n);
        let vel = ensemble.velocities();
        let sorted_vel: Vec<f64> = index.line_order().iter().map(|&j| vel[j]).collect();
        let x = ensemble.positions();
        return (0..n)
            .into_par_iter()
            .map_init(Vec::new, |group, i| {
                index.line_alignment_sum(x[i], vel[i], &sorted_vel, &weights, group) * inv_n
            })
            .collect();
    }
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(d)
        .enumerate()
        .for_each_init(Scratch::default, |scratch, (i, acc)| {
            let vi = ensemble.velocity(i);
            let mut count = 0usize;
            index.for_each_tie_group(ensemble.position(i), scratch, |_, group| {
                count += group.len();
                let w = kernel.value(count as f64 / n as f64);
                for &j in group {
                    let vj = ensemble.velocity(j);
                    for k in 0..d {
                        acc[k] += w * (vj[k] - vi[k]);
                    }
                }
            });
            for a in acc.iter_mut() {
                *a *= inv_n;
            }
        });
    out
}

/// `table[c] = K(c / n)` for `c = 0..=n`; the same expression the tie-group
/// walk evaluates, so both paths produce identical weights.
pub(crate) fn weight_table(kernel: &Kernel, n: usize) -> Vec<f64> {
    (0..=n).map(|c| kernel.value(c as f64 / n as f64)).collect()
}

/// One classical RK4 step of `x' = v`, `v' = topological_rhs`.
pub fn step_rk4(ensemble: &ParticleEnsemble, kernel: &Kernel, dt: f64) -> Result<ParticleEnsemble, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::Parameters(format!("dt must be positive, got {dt}")));
    }
    if !ensemble.is_finite() {
        return Err(DynamicsError::NonFiniteInput);
    }
    let next = rk4_unchecked(ensemble, kernel, dt);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NonFinite {
            t: dt,
            dt,
            max_speed: ensemble.max_speed(),
        })
    }
}

/// Generic RK4 step for a phase-space state under an acceleration field.
pub(crate) fn rk4_with<A>(ensemble: &ParticleEnsemble, dt: f64, mut accel: A) -> ParticleEnsemble
where
    A: FnMut(&ParticleEnsemble) -> Vec<f64>,
{
    let d = ensemble.dim();
    let x0 = ensemble.positions();
    let v0 = ensemble.velocities();
    let stage = |k_x: &[f64], k_v: &[f64], h: f64| {
        let x = x0.iter().zip(k_x).map(|(x, k)| x + h * k).collect();
        let v = v0.iter().zip(k_v).map(|(v, k)| v + h * k).collect();
        ParticleEnsemble::from_parts_unchecked(d, x, v)
    };
    let k1v = accel(ensemble);
    let s2 = stage(v0, &k1v, 0.5 * dt);
    let k2v = accel(&s2);
    let s3 = stage(s2.velocities(), &k2v, 0.5 * dt);
    let k3v = accel(&s3);
    let s4 = stage(s3.velocities(), &k3v, dt);
    let k4v = accel(&s4);
    let h6 = dt / 6.0;
    let combine = |base: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..base.len())
            .map(|m| base[m] + h6 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]))
            .collect()
    };
    let x = combine(x0, v0, s2.velocities(), s3.velocities(), s4.velocities());
    let v = combine(v0, &k1v, &k2v, &k3v, &k4v);
    ParticleEnsemble::from_parts_unchecked(d, x, v)
}

fn rk4_unchecked(ensemble: &ParticleEnsemble, kernel: &Kernel, dt: f64) -> ParticleEnsemble {
    rk4_with(ensemble, dt, |s| rhs_unchecked(s, kernel))
}

/// Step schedule covering `[0, t_final]` with steps of `dt`; the last step
/// is shortened to land on `t_final`. Times are `k * dt`, not accumulated.
pub fn step_times(dt: f64, t_final: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::Parameters(format!("dt must be positive, got {dt}")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(DynamicsError::Parameters(format!(
            "t_final must be non-negative, got {t_final}"
        )));
    }
    let steps = if t_final == 0.0 {
        0
    } else {
        (t_final / dt - 1e-9).ceil().max(1.0) as usize
    };
    Ok((0..=steps)
        .map(|k| if k == steps { t_final } else { k as f64 * dt })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub ensemble: ParticleEnsemble,
}

/// Per-frame support diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub t: Vec<f64>,
    pub max_speed: Vec<f64>,
    pub max_radius: Vec<f64>,
}

impl Summary {
    fn record(&mut self, t: f64, e: &ParticleEnsemble) {
        self.t.push(t);
        self.max_speed.push(e.max_speed());
        self.max_radius.push(e.max_radius());
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub frames: Vec<Frame>,
    pub summary: Summary,
}

/// Integrates to `t_final`, calling `observe(step, t, state)` after every
/// step (and once for the initial state with `step = 0`).
pub fn integrate<O>(
    initial: &ParticleEnsemble,
    kernel: &Kernel,
    dt: f64,
    t_final: f64,
    mut observe: O,
) -> Result<ParticleEnsemble, DynamicsError>
where
    O: FnMut(usize, f64, &ParticleEnsemble),
{
    if !initial.is_finite() {
        return Err(DynamicsError::NonFiniteInput);
    }
    let times = step_times(dt, t_final)?;
    let mut state = initial.clone();
    observe(0, 0.0, &state);
    for (k, w) in times.windows(2).enumerate() {
        let h = w[1] - w[0];
        let next = rk4_unchecked(&state, kernel, h);
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite {
                t: w[1],
                dt: h,
                max_speed: state.max_speed(),
            });
        }
        state = next;
        observe(k + 1, w[1], &state);
    }
    Ok(state)
}

/// Runs the agent system, keeping every `observer_stride`-th frame and the final one.
pub fn simulate(
    initial: &ParticleEnsemble,
    kernel: &Kernel,
    dt: f64,
    t_final: f64,
    observer_stride: usize,
) -> Result<Simulation, DynamicsError> {
    if observer_stride == 0 {
        return Err(DynamicsError::Parameters("observer_stride must be >= 1".into()));
    }
    let last = step_times(dt, t_final)?.len() - 1;
    let mut frames = Vec::new();
    let mut summary = Summary::default();
    integrate(initial, kernel, dt, t_final, |k, t, s| {
        if k % observer_stride == 0 || k == last {
            summary.record(t, s);
            frames.push(Frame { t, ensemble: s.clone() });
        }
    })?;
    Ok(Simulation { frames, summary })
}

/// CSV `t,agent,x0..x{d-1},v0..v{d-1}`, one row per agent per frame.
pub fn write_trajectory_csv<W: Write>(frames: &[Frame], out: W) -> Result<(), DynamicsError> {
    let mut w = csv::Writer::from_writer(out);
    let dim = frames.first().map_or(1, |f| f.ensemble.dim());
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    header.extend((0..dim).map(|k| format!("v{k}")));
    w.write_record(&header).map_err(csv_io)?;
    for f in frames {
        for i in 0..f.ensemble.len() {
            let mut row = vec![f.t.to_string(), i.to_string()];
            row.extend(f.ensemble.position(i).iter().map(|x| x.to_string()));
            row.extend(f.ensemble.velocity(i).iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double loop over the defining count.
    fn brute_rhs(e: &ParticleEnsemble, k: &Kernel) -> Vec<f64> {
        let n = e.len();
        let d = e.dim();
        let dist = |a: usize, b: usize| crate::neighbors::distance(e.position(a), e.position(b));
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..n {
                let r = dist(i, j);
                let count = (0..n).filter(|&m| dist(i, m) <= r).count();
                let w = k.value(count as f64 / n as f64);
                for c in 0..d {
                    out[i * d + c] += w * (e.velocity(j)[c] - e.velocity(i)[c]) / n as f64;
                }
            }
        }
        out
    }

    fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ParticleEnsemble {
        let x = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ParticleEnsemble::new(d, x, v).unwrap()
    }

    #[test]
    fn rank_profile_examples() {
        let e = ParticleEnsemble::from_1d(&[0.0, 1.0, 3.0], &[0.0; 3]).unwrap();
        let p = rank_profile(&e, 0).unwrap();
        let ranks: Vec<(usize, f64)> = p.ordered_neighbors.iter().map(|r| (r.index, r.rank)).collect();
        assert_eq!(ranks, vec![(0, 1.0 / 3.0), (1, 2.0 / 3.0), (2, 1.0)]);

        let e = ParticleEnsemble::from_1d(&[0.0, 1.0, -1.0], &[0.0; 3]).unwrap();
        let p = rank_profile(&e, 0).unwrap();
        assert_eq!(p.tie_groups, vec![vec![0], vec![1, 2]]);
        assert_eq!(p.ordered_neighbors[1].rank, 1.0);
        assert_eq!(p.ordered_neighbors[2].rank, 1.0);

        let e = ParticleEnsemble::from_1d(&[0.3, -2.0], &[0.0; 2]).unwrap();
        assert_eq!(rank_profile(&e, 0).unwrap().ordered_neighbors[1].rank, 1.0);
        assert!(matches!(rank_profile(&e, 2), Err(DynamicsError::Index { index: 2, n: 2 })));
    }

    #[test]
    fn rank_profile_matches_direct_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..=3 {
            for _ in 0..20 {
                let n = rng.gen_range(1..30);
                // Quantized coordinates force plenty of ties.
                let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-3..=3) as f64 * 0.5).collect();
                let e = ParticleEnsemble::new(d, x, vec![0.0; n * d]).unwrap();
                for i in 0..n {
                    let p = rank_profile(&e, i).unwrap();
                    assert_eq!(p.ordered_neighbors[0].distance, 0.0);
                    assert!(p.ordered_neighbors[0].rank >= 1.0 / n as f64);
                    assert_eq!(p.ordered_neighbors.last().unwrap().rank, 1.0);
                    for w in p.ordered_neighbors.windows(2) {
                        assert!(w[0].distance <= w[1].distance && w[0].rank <= w[1].rank);
                    }
                    for nb in &p.ordered_neighbors {
                        let count = (0..n)
                            .filter(|&k| crate::neighbors::distance(e.position(k), e.position(i)) <= nb.distance)
                            .count();
                        assert_eq!(nb.rank, count as f64 / n as f64);
                    }
                    for g in &p.tie_groups {
                        let r: Vec<f64> = p
                            .ordered_neighbors
                            .iter()
                            .filter(|nb| g.contains(&nb.index))
                            .map(|nb| nb.rank)
                            .collect();
                        assert!(r.windows(2).all(|w| w[0] == w[1]));
                    }
                }
            }
        }
    }

    #[test]
    fn rhs_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kernels = [
            Kernel::affine(1.0, 0.5).unwrap(),
            Kernel::exponential(2.0, 3.0).unwrap(),
            Kernel::constant(0.7).unwrap(),
        ];
        for d in 1..=3 {
            for k in &kernels {
                let e = random_ensemble(&mut rng, 25, d);
                let fast = topological_rhs(&e, k).unwrap();
                let slow = brute_rhs(&e, k);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-13, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn rhs_two_body_and_equilibrium() {
        let k = Kernel::affine(2.0, 1.0).unwrap();
        let e = ParticleEnsemble::from_1d(&[0.0, 0.4], &[0.0, 1.0]).unwrap();
        let a = topological_rhs(&e, &k).unwrap();
        assert_eq!(a, vec![0.5 * k.value(1.0), -0.5 * k.value(1.0)]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..40).map(|_| rng.gen::<f64>()).collect();
        let e = ParticleEnsemble::new(2, x, [0.3, -0.2].repeat(20)).unwrap();
        assert!(topological_rhs(&e, &k).unwrap().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn constant_kernel_is_relaxation_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = random_ensemble(&mut rng, 17, 2);
        let kappa = 1.3;
        let a = topological_rhs(&e, &Kernel::constant(kappa).unwrap()).unwrap();
        let mean = e.mean_velocity();
        for i in 0..e.len() {
            for c in 0..2 {
                let expect = kappa * (mean[c] - e.velocity(i)[c]);
                assert!((a[i * 2 + c] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rk4_fixed_point_and_free_streaming() {
        let k = Kernel::affine(1.0, 0.5).unwrap();
        let e = ParticleEnsemble::from_1d(&[0.0, 0.5, 2.0], &[0.0; 3]).unwrap();
        assert_eq!(step_rk4(&e, &k, 0.1).unwrap(), e);

        let one = ParticleEnsemble::new(2, vec![1.0, -1.0], vec![0.5, 2.0]).unwrap();
        let out = simulate(&one, &k, 0.1, 1.0, 1).unwrap();
        let last = &out.frames.last().unwrap().ensemble;
        assert!((last.position(0)[0] - 1.5).abs() < 1e-14);
        assert!((last.position(0)[1] - 1.0).abs() < 1e-14);
        assert_eq!(last.velocity(0), &[0.5, 2.0]);
        assert!(step_rk4(&e, &k, 0.0).is_err());
        assert!(step_rk4(&e, &k, -1.0).is_err());
    }

    #[test]
    fn rk4_matches_linear_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let e = random_ensemble(&mut rng, 4, 1);
        let k = Kernel::constant(1.0).unwrap();
        let mut s = e.clone();
        for _ in 0..100 {
            s = step_rk4(&s, &k, 0.01).unwrap();
        }
        let vbar = e.mean_velocity()[0];
        let decay = (-1f64).exp();
        for i in 0..4 {
            let exact_v = vbar + decay * (e.velocity(i)[0] - vbar);
            let exact_x = e.position(i)[0] + vbar + (1.0 - decay) * (e.velocity(i)[0] - vbar);
            assert!((s.velocity(i)[0] - exact_v).abs() < 1e-8);
            assert!((s.position(i)[0] - exact_x).abs() < 1e-8);
        }
    }

    #[test]
    fn simulate_zero_length_and_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let e = random_ensemble(&mut rng, 12, 2);
        let k = Kernel::constant(1.0).unwrap();
        let out = simulate(&e, &k, 0.1, 0.0, 1).unwrap();
        assert_eq!(out.frames.len(), 1);
        assert_eq!(out.frames[0].ensemble, e);

        let out = simulate(&e, &k, 0.01, 1.0, 10).unwrap();
        assert_eq!(out.frames.len(), 11);
        assert_eq!(out.summary.t.len(), 11);
        let p0 = e.mean_velocity();
        let p1 = out.frames.last().unwrap().ensemble.mean_velocity();
        for c in 0..2 {
            assert!((p0[c] - p1[c]).abs() * 12.0 < 1e-10);
        }
    }

    #[test]
    fn step_schedule_lands_on_final_time() {
        let t = step_times(0.3, 1.0).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert_eq!(step_times(0.01, 1.0).unwrap().len(), 101);
        assert!(step_times(0.0, 1.0).is_err());
        assert!(step_times(0.1, -1.0).is_err());
    }

    #[test]
    fn support_bounds_hold_along_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let k = Kernel::exponential(1.0, 2.0).unwrap();
        let e = random_ensemble(&mut rng, 20, 2);
        let b = e.support_box();
        let out = simulate(&e, &k, 0.01, 2.0, 1).unwrap();
        for w in out.summary.max_speed.windows(2) {
            assert!(w[1] <= w[0] + 10.0 * 1e-8);
        }
        for (t, r) in out.summary.t.iter().zip(&out.summary.max_radius) {
            assert!(*r <= b.spatial_bound(*t) + 1e-8);
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let e = ParticleEnsemble::new(2, vec![0.0, 1.0], vec![0.5, -0.25]).unwrap();
        let frames = vec![Frame { t: 0.0, ensemble: e }];
        let mut buf = Vec::new();
        write_trajectory_csv(&frames, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,agent,x0,x1,v0,v1\n0,0,0,1,0.5,-0.25\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn rhs_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..20, d in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_ensemble(&mut rng, n, d);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let k = Kernel::affine(1.0, 0.8).unwrap();
            let a = topological_rhs(&e, &k).unwrap();
            let b = topological_rhs(&e.permuted(&perm), &k).unwrap();
            for (slot, &src) in perm.iter().enumerate() {
                for c in 0..d {
                    prop_assert!((b[slot * d + c] - a[src * d + c]).abs() < 1e-14);
                }
            }
        }
    }
}
