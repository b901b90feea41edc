use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MeanFieldError;
use crate::ensemble::ParticleEnsemble;
use crate::measures::GridDensity1D;
use crate::seeding::stream_rng;

/// One-dimensional compactly supported marginal density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    /// `(1 - cos(2 pi s)) / (hi - lo)` with `s = (x - lo) / (hi - lo)`.
    RaisedCosine { lo: f64, hi: f64 },
}

impl Marginal {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } | Marginal::RaisedCosine { lo, hi } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<(), MeanFieldError> {
        let (lo, hi) = self.bounds();
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(())
        } else {
            Err(MeanFieldError::Datum(format!("marginal support [{lo}, {hi}] cannot carry a density")))
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            Marginal::Uniform { .. } => 1.0 / (hi - lo),
            Marginal::RaisedCosine { .. } => (1.0 - (2.0 * PI * (x - lo) / (hi - lo)).cos()) / (hi - lo),
        }
    }

    pub fn sup_density(&self) -> f64 {
        let (lo, hi) = self.bounds();
        match self {
            Marginal::Uniform { .. } => 1.0 / (hi - lo),
            Marginal::RaisedCosine { .. } => 2.0 / (hi - lo),
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        let s = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        match self {
            Marginal::Uniform { .. } => s,
            Marginal::RaisedCosine { .. } => s - (2.0 * PI * s).sin() / (2.0 * PI),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.bounds();
        let u: f64 = rng.gen();
        match self {
            Marginal::Uniform { .. } => lo + (hi - lo) * u,
            Marginal::RaisedCosine { .. } => {
                // The CDF is strictly increasing; bisect down to rounding.
                let (mut a, mut b) = (lo, hi);
                for _ in 0..64 {
                    let m = 0.5 * (a + b);
                    if self.cdf(m) < u {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    /// Exact cell averages on `cells` uniform cells of `[x_min, x_max]`.
    pub fn to_grid(&self, x_min: f64, x_max: f64, cells: usize) -> Result<GridDensity1D, MeanFieldError> {
        self.validate()?;
        Ok(GridDensity1D::from_antiderivative(x_min, x_max, cells, |x| self.cdf(x))?)
    }
}

/// Initial velocity field `u0(x)` of a monokinetic datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum VelocityProfile {
    Constant { value: f64 },
    Linear { slope: f64, offset: f64 },
    /// `amplitude * sin(2 pi frequency x)`.
    Sine { amplitude: f64, frequency: f64 },
}

impl VelocityProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            VelocityProfile::Constant { value } => value,
            VelocityProfile::Linear { slope, offset } => slope * x + offset,
            VelocityProfile::Sine { amplitude, frequency } => amplitude * (2.0 * PI * frequency * x).sin(),
        }
    }

    pub fn validate(&self) -> Result<(), MeanFieldError> {
        let ok = match *self {
            VelocityProfile::Constant { value } => value.is_finite(),
            VelocityProfile::Linear { slope, offset } => slope.is_finite() && offset.is_finite(),
            VelocityProfile::Sine { amplitude, frequency } => amplitude.is_finite() && frequency.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(MeanFieldError::Datum(format!("non-finite velocity profile {self:?}")))
        }
    }
}

/// Law of one agent at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    /// Every position and velocity coordinate drawn independently.
    Product { dim: usize, position: Marginal, velocity: Marginal },
    /// One-dimensional `rho0(x) delta(v - u0(x))`, optionally mollified at scale `epsilon`.
    Monokinetic {
        density: Marginal,
        velocity: VelocityProfile,
        #[serde(default)]
        epsilon: f64,
    },
}

impl InitialDatum {
    pub fn dim(&self) -> usize {
        match self {
            InitialDatum::Product { dim, .. } => *dim,
            InitialDatum::Monokinetic { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<(), MeanFieldError> {
        match self {
            InitialDatum::Product { dim, position, velocity } => {
                if *dim == 0 {
                    return Err(MeanFieldError::Datum("dim must be at least 1".into()));
                }
                position.validate()?;
                velocity.validate()
            }
            InitialDatum::Monokinetic { density, velocity, epsilon } => {
                density.validate()?;
                velocity.validate()?;
                if epsilon.is_finite() && *epsilon >= 0.0 {
                    Ok(())
                } else {
                    Err(MeanFieldError::Datum(format!("epsilon must be non-negative, got {epsilon}")))
                }
            }
        }
    }
}

/// Compactly supported bump `exp(-1/(1-|z|^2))` on the unit ball of `R^{2d}`,
/// scaled by `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self, MeanFieldError> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Self { epsilon })
        } else {
            Err(MeanFieldError::Datum(format!("mollifier epsilon must be positive, got {epsilon}")))
        }
    }

    /// Unnormalized bump profile as a function of `|z|`.
    pub fn profile(r: f64) -> f64 {
        if r < 1.0 {
            (-1.0 / (1.0 - r * r)).exp()
        } else {
            0.0
        }
    }

    /// One draw from the normalized bump in `R^dim` (unit scale).
    pub fn sample_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
        let mut z = vec![0.0; dim];
        loop {
            for c in z.iter_mut() {
                *c = rng.gen_range(-1.0..1.0);
            }
            let r2: f64 = z.iter().map(|c| c * c).sum();
            if r2 >= 1.0 {
                continue;
            }
            // Envelope: the bump's maximum e^{-1} at the origin.
            if rng.gen::<f64>() < (1.0 - 1.0 / (1.0 - r2)).exp() {
                return z;
            }
        }
    }
}

/// `n` iid draws from `datum`, deterministic in `rng_seed`.
///
/// Base draws (positions, and product velocities) come from stream 0 and
/// mollifier noise from stream 1, so data differing only in `epsilon`
/// share their base points.
pub fn sample_iid(datum: &InitialDatum, n: usize, rng_seed: u64) -> Result<ParticleEnsemble, MeanFieldError> {
    datum.validate()?;
    if n == 0 {
        return Err(MeanFieldError::Datum("sample size must be at least 1".into()));
    }
    let mut base = stream_rng(rng_seed, 0);
    match *datum {
        InitialDatum::Product { dim, position, velocity } => {
            let mut x = Vec::with_capacity(n * dim);
            let mut v = Vec::with_capacity(n * dim);
            for _ in 0..n {
                for _ in 0..dim {
                    x.push(position.sample(&mut base));
                }
                for _ in 0..dim {
                    v.push(velocity.sample(&mut base));
                }
            }
            Ok(ParticleEnsemble::from_parts_unchecked(dim, x, v))
        }
        InitialDatum::Monokinetic { density, velocity, epsilon } => {
            let x0: Vec<f64> = (0..n).map(|_| density.sample(&mut base)).collect();
            Ok(mollify(&x0, &velocity, epsilon, rng_seed))
        }
    }
}

/// Monokinetic draw `x0 ~ rho0`, `(x, v) = (x0, u0(x0)) + epsilon * zeta`.
pub fn monokinetic_sample(
    rho0: &GridDensity1D,
    u0: &VelocityProfile,
    epsilon: f64,
    n: usize,
    rng_seed: u64,
) -> Result<ParticleEnsemble, MeanFieldError> {
    u0.validate()?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(MeanFieldError::Datum(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if n == 0 {
        return Err(MeanFieldError::Datum("sample size must be at least 1".into()));
    }
    let mut base = stream_rng(rng_seed, 0);
    let x0: Vec<f64> = (0..n).map(|_| rho0.sample(&mut base)).collect();
    Ok(mollify(&x0, u0, epsilon, rng_seed))
}

pub fn mollified_monokinetic_sample(
    rho0: &GridDensity1D,
    u0: &VelocityProfile,
    moll: &MollifierSpec,
    n: usize,
    rng_seed: u64,
) -> Result<ParticleEnsemble, MeanFieldError> {
    MollifierSpec::new(moll.epsilon)?;
    monokinetic_sample(rho0, u0, moll.epsilon, n, rng_seed)
}

fn mollify(x0: &[f64], u0: &VelocityProfile, epsilon: f64, rng_seed: u64) -> ParticleEnsemble {
    let mut x = x0.to_vec();
    let mut v: Vec<f64> = x0.iter().map(|&p| u0.eval(p)).collect();
    if epsilon > 0.0 {
        let mut noise = stream_rng(rng_seed, 1);
        for i in 0..x.len() {
            let z = MollifierSpec::sample_unit(2, &mut noise);
            x[i] += epsilon * z[0];
            v[i] += epsilon * z[1];
        }
    }
    ParticleEnsemble::from_parts_unchecked(1, x, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{wasserstein1_assignment, EmpiricalMeasure};

    fn uniform_box() -> InitialDatum {
        InitialDatum::Product {
            dim: 1,
            position: Marginal::Uniform { lo: 0.0, hi: 1.0 },
            velocity: Marginal::Uniform { lo: -1.0, hi: 1.0 },
        }
    }

    #[test]
    fn product_sample_mean_in_clt_band() {
        let n = 1000;
        let e = sample_iid(&uniform_box(), n, 42).unwrap();
        let mean = e.positions().iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 / (n as f64).sqrt());
        assert!(e.velocities().iter().all(|v| (-1.0..1.0).contains(v)));
        assert_eq!(sample_iid(&uniform_box(), n, 42).unwrap(), e);
        let one = sample_iid(&uniform_box(), 1, 1).unwrap();
        assert!((0.0..1.0).contains(&one.positions()[0]));
    }

    #[test]
    fn exact_monokinetic_constraint() {
        let datum = InitialDatum::Monokinetic {
            density: Marginal::Uniform { lo: 0.0, hi: 1.0 },
            velocity: VelocityProfile::Linear { slope: 1.0, offset: 0.0 },
            epsilon: 0.0,
        };
        let e = sample_iid(&datum, 500, 9).unwrap();
        assert!(e.positions().iter().zip(e.velocities()).all(|(x, v)| x == v));
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = InitialDatum::Product {
            dim: 1,
            position: Marginal::Uniform { lo: 1.0, hi: 1.0 },
            velocity: Marginal::Uniform { lo: 0.0, hi: 1.0 },
        };
        assert!(sample_iid(&bad, 10, 0).is_err());
        assert!(sample_iid(&uniform_box(), 0, 0).is_err());
        assert!(MollifierSpec::new(0.0).is_err());
    }

    #[test]
    fn raised_cosine_sampling_matches_cdf() {
        let m = Marginal::RaisedCosine { lo: 0.0, hi: 1.0 };
        let mut rng = stream_rng(3, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
        for q in [0.1, 0.25, 0.5, 0.8] {
            let frac = xs.iter().filter(|&&x| x <= q).count() as f64 / n as f64;
            let p = m.cdf(q);
            assert!((frac - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{q}: {frac} vs {p}");
        }
        let g = m.to_grid(-0.1, 1.1, 64).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-14);
        assert!(g.sup_norm() <= m.sup_density());
    }

    #[test]
    fn bump_samples_match_radial_moment() {
        // E|z|^2 under the planar bump, by quadrature of the radial profile.
        let k = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..k {
            let r = (i as f64 + 0.5) / k as f64;
            num += r * r * MollifierSpec::profile(r) * r;
            den += MollifierSpec::profile(r) * r;
        }
        let second = num / den;
        let mut rng = stream_rng(8, 1);
        let n = 20_000;
        let mut sum = [0.0; 2];
        let mut r2 = Vec::with_capacity(n);
        for _ in 0..n {
            let z = MollifierSpec::sample_unit(2, &mut rng);
            let s = z[0] * z[0] + z[1] * z[1];
            assert!(s <= 1.0);
            sum[0] += z[0];
            sum[1] += z[1];
            r2.push(s);
        }
        let mean_r2 = r2.iter().sum::<f64>() / n as f64;
        let sd = (r2.iter().map(|s| (s - mean_r2).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean_r2 - second).abs() < 4.0 * sd / (n as f64).sqrt());
        for s in sum {
            assert!((s / n as f64).abs() < 4.0 * (second / 2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn mollified_samples_stay_near_the_graph() {
        let rho0 = GridDensity1D::uniform(0.0, 1.0).unwrap();
        let u0 = VelocityProfile::Sine { amplitude: 0.1, frequency: 1.0 };
        let tiny = mollified_monokinetic_sample(&rho0, &u0, &MollifierSpec::new(1e-8).unwrap(), 300, 4).unwrap();
        for i in 0..300 {
            assert!((tiny.velocities()[i] - u0.eval(tiny.positions()[i])).abs() <= 2e-8);
        }
        let wide = mollified_monokinetic_sample(&rho0, &u0, &MollifierSpec::new(0.1).unwrap(), 300, 4).unwrap();
        assert!(wide.positions().iter().all(|x| (-0.1..=1.1).contains(x)));
    }

    #[test]
    fn mollification_moves_w1_by_at_most_two_epsilon() {
        let rho0 = GridDensity1D::normalized(0.0, 1.0, vec![1.0, 2.0, 3.0, 2.0]).unwrap();
        let u0 = VelocityProfile::Sine { amplitude: 0.5, frequency: 1.0 };
        let exact = monokinetic_sample(&rho0, &u0, 0.0, 200, 77).unwrap();
        for eps in [0.3, 0.1, 1e-2, 1e-4] {
            let moll = monokinetic_sample(&rho0, &u0, eps, 200, 77).unwrap();
            let w1 = wasserstein1_assignment(&EmpiricalMeasure::phase(&moll), &EmpiricalMeasure::phase(&exact)).unwrap();
            assert!(w1 <= 2.0 * eps, "eps {eps}: {w1}");
        }
    }
}
