//! Communication kernels `K: [0,1] -> (0, inf)` applied to neighbor rank.
//!
//! Every family is positive, Lipschitz and non-increasing on `[0,1]`, and
//! exposes closed forms for `gamma = int_0^1 K`, `Lip(K)` and `sup K`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("rank argument {0} outside [0, 1]")]
    Domain(f64),
    #[error("invalid kernel parameters: {0}")]
    Invalid(String),
}

/// Interaction strength as a function of the neighbor rank `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// `K(z) = kappa`.
    Constant { kappa: f64 },
    /// `K(z) = a - b z`, requires `a > b >= 0`.
    Affine { a: f64, b: f64 },
    /// `K(z) = scale * exp(-beta z)`, requires `scale > 0`, `beta >= 0`.
    Exponential { scale: f64, beta: f64 },
}

impl Kernel {
    pub fn constant(kappa: f64) -> Result<Self, KernelError> {
        Kernel::Constant { kappa }.validated()
    }

    pub fn affine(a: f64, b: f64) -> Result<Self, KernelError> {
        Kernel::Affine { a, b }.validated()
    }

    pub fn exponential(scale: f64, beta: f64) -> Result<Self, KernelError> {
        Kernel::Exponential { scale, beta }.validated()
    }

    /// Checks positivity and monotonicity constraints; used after deserialization.
    pub fn validated(self) -> Result<Self, KernelError> {
        let ok = match self {
            Kernel::Constant { kappa } => kappa.is_finite() && kappa > 0.0,
            Kernel::Affine { a, b } => a.is_finite() && b.is_finite() && b >= 0.0 && a > b,
            Kernel::Exponential { scale, beta } => {
                scale.is_finite() && beta.is_finite() && scale > 0.0 && beta >= 0.0
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(KernelError::Invalid(format!(
                "{self:?} is not positive and non-increasing on [0,1]"
            )))
        }
    }

    /// Evaluates `K(z)` without the domain check. Callers in the hot loops
    /// pass rank values `count / n`, which always lie in `(0, 1]`.
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Kernel::Constant { kappa } => kappa,
            Kernel::Affine { a, b } => a - b * z,
            Kernel::Exponential { scale, beta } => scale * (-beta * z).exp(),
        }
    }

    pub fn eval(&self, z: f64) -> Result<f64, KernelError> {
        if !(0.0..=1.0).contains(&z) {
            return Err(KernelError::Domain(z));
        }
        Ok(self.value(z))
    }

    /// `gamma = int_0^1 K(z) dz`.
    pub fn gamma(&self) -> f64 {
        match *self {
            Kernel::Constant { kappa } => kappa,
            Kernel::Affine { a, b } => a - 0.5 * b,
            Kernel::Exponential { scale, beta } => {
                if beta == 0.0 {
                    scale
                } else {
                    scale * (-(-beta).exp_m1()) / beta
                }
            }
        }
    }

    pub fn lip_constant(&self) -> f64 {
        match *self {
            Kernel::Constant { .. } => 0.0,
            Kernel::Affine { b, .. } => b,
            Kernel::Exponential { scale, beta } => scale * beta,
        }
    }

    /// `sup_{[0,1]} K = K(0)` for a non-increasing kernel.
    pub fn sup_norm(&self) -> f64 {
        self.value(0.0)
    }

    /// `max(1, Lip(K), sup K)`.
    pub fn kcal(&self) -> f64 {
        1f64.max(self.lip_constant()).max(self.sup_norm())
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Kernel::Constant { .. } => true,
            Kernel::Affine { b, .. } => b == 0.0,
            Kernel::Exponential { beta, .. } => beta == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalogue() -> Vec<Kernel> {
        vec![
            Kernel::constant(1.0).unwrap(),
            Kernel::constant(0.3).unwrap(),
            Kernel::affine(2.0, 1.0).unwrap(),
            Kernel::affine(1.0, 0.5).unwrap(),
            Kernel::exponential(1.0, 1.0).unwrap(),
            Kernel::exponential(2.5, 3.0).unwrap(),
        ]
    }

    #[test]
    fn evaluates_catalogue_examples() {
        assert_eq!(Kernel::constant(1.0).unwrap().eval(0.5).unwrap(), 1.0);
        let aff = Kernel::affine(2.0, 1.0).unwrap();
        assert_eq!(aff.eval(0.0).unwrap(), 2.0);
        assert_eq!(aff.eval(1.0).unwrap(), 1.0);
        let e = Kernel::exponential(1.0, 1.0).unwrap().eval(1.0).unwrap();
        assert!((e - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn gamma_closed_forms() {
        assert_eq!(Kernel::constant(1.0).unwrap().gamma(), 1.0);
        assert_eq!(Kernel::affine(2.0, 1.0).unwrap().gamma(), 1.5);
        let g = Kernel::exponential(1.0, 2.0).unwrap().gamma();
        assert!((g - (1.0 - (-2f64).exp()) / 2.0).abs() < 1e-15);
        assert!((g - 0.432_332_358_381_693_6).abs() < 1e-15);
    }

    #[test]
    fn gamma_matches_simpson_quadrature() {
        for k in catalogue() {
            let n = 2000;
            let h = 1.0 / n as f64;
            let mut s = k.value(0.0) + k.value(1.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * k.value(i as f64 * h);
            }
            assert!((s * h / 3.0 - k.gamma()).abs() < 1e-10, "{k:?}");
        }
    }

    #[test]
    fn rejects_out_of_domain_and_bad_parameters() {
        let k = Kernel::constant(1.0).unwrap();
        assert_eq!(k.eval(-0.1), Err(KernelError::Domain(-0.1)));
        assert!(k.eval(1.5).is_err());
        assert!(Kernel::constant(0.0).is_err());
        assert!(Kernel::affine(1.0, 1.0).is_err());
        assert!(Kernel::affine(1.0, -0.5).is_err());
        assert!(Kernel::exponential(1.0, -1.0).is_err());
        assert!(Kernel::exponential(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn sampled_invariants_hold() {
        for k in catalogue() {
            let zs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
            for (i, &z1) in zs.iter().enumerate() {
                assert!(k.value(z1) > 0.0);
                for &z2 in &zs[i..] {
                    assert!(k.value(z1) >= k.value(z2));
                    let diff = (k.value(z1) - k.value(z2)).abs();
                    assert!(diff <= k.lip_constant() * (z2 - z1) + 1e-14);
                }
            }
            assert!(k.kcal() >= 1.0 && k.kcal() >= k.sup_norm());
        }
    }

    #[test]
    fn deserializes_tagged_families() {
        let k: Kernel = serde_json::from_str(r#"{"family":"affine","a":1.0,"b":0.5}"#).unwrap();
        assert_eq!(k, Kernel::Affine { a: 1.0, b: 0.5 });
    }
}
