//! Proximal operators of the nonsmooth terms used by the experiments.

use crate::problem::ProxOracle;

/// Soft-thresholding: componentwise `sign(u)·max(|u|-t, 0)`.
pub fn prox_l1(t: f64, u: &[f64]) -> Vec<f64> {
    u.iter()
        .map(|&v| v.signum() * (v.abs() - t).max(0.0))
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect()
}

/// Prox of `t·½‖·‖²`.
pub fn prox_sqnorm(t: f64, u: &[f64]) -> Vec<f64> {
    let s = 1.0 / (1.0 + t);
    u.iter().map(|v| v * s).collect()
}

/// Projection onto the nonnegative orthant; independent of `t`.
pub fn prox_indicator_nonneg(_t: f64, u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v.max(0.0)).collect()
}

/// `g ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct Zero {
    pub dim: usize,
}

impl ProxOracle for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox(&self, _t: f64, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
    fn value(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `g = weight·‖·‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub dim: usize,
    pub weight: f64,
}

impl L1Norm {
    pub fn new(dim: usize) -> Self {
        Self { dim, weight: 1.0 }
    }
}

impl ProxOracle for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox(&self, t: f64, u: &[f64]) -> Vec<f64> {
        prox_l1(t * self.weight, u)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(self.weight * x.iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// `g = (c/2)‖·‖²`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSqNorm {
    pub dim: usize,
    pub c: f64,
}

impl ScaledSqNorm {
    pub fn half(dim: usize) -> Self {
        Self { dim, c: 1.0 }
    }
}

impl ProxOracle for ScaledSqNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox(&self, t: f64, u: &[f64]) -> Vec<f64> {
        prox_sqnorm(t * self.c, u)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(0.5 * self.c * crate::linalg::norm_sq(x))
    }
    fn quadratic_scale(&self) -> Option<f64> {
        Some(self.c)
    }
}

/// Indicator of `{x : x ≥ 0}`.
#[derive(Debug, Clone, Copy)]
pub struct NonnegIndicator {
    pub dim: usize,
}

impl ProxOracle for NonnegIndicator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox(&self, t: f64, u: &[f64]) -> Vec<f64> {
        prox_indicator_nonneg(t, u)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        if x.iter().all(|v| *v >= 0.0) {
            Some(0.0)
        } else {
            Some(f64::INFINITY)
        }
    }
    fn is_indicator(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(0.5, &[2.0]), vec![1.5]);
        assert_eq!(prox_l1(0.5, &[0.3]), vec![0.0]);
        assert_eq!(prox_l1(1.0, &[-2.0, 0.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn sqnorm_examples() {
        assert_eq!(prox_sqnorm(1.0, &[2.0]), vec![1.0]);
        assert_eq!(prox_sqnorm(0.0, &[3.0, -1.0]), vec![3.0, -1.0]);
        assert_eq!(prox_sqnorm(3.0, &[-4.0, 8.0]), vec![-1.0, 2.0]);
    }

    #[test]
    fn nonneg_examples() {
        assert_eq!(prox_indicator_nonneg(1.0, &[-2.0, 3.0]), vec![0.0, 3.0]);
        assert_eq!(prox_indicator_nonneg(7.0, &[0.0]), vec![0.0]);
        assert_eq!(prox_indicator_nonneg(0.1, &[5.0]), vec![5.0]);
    }

    #[test]
    fn zero_prox_is_identity() {
        let z = Zero { dim: 3 };
        assert_eq!(z.prox(2.0, &[1.0, -2.0, 3.0]), vec![1.0, -2.0, 3.0]);
    }

    fn moreau_objective(g: &dyn ProxOracle, t: f64, u: &[f64], w: &[f64]) -> f64 {
        g.value(w).unwrap() + crate::linalg::norm_sq(&crate::linalg::sub(w, u)) / (2.0 * t)
    }

    #[test]
    fn prox_minimizes_moreau_objective_on_random_samples() {
        let oracles: Vec<Box<dyn ProxOracle>> = vec![
            Box::new(L1Norm::new(4)),
            Box::new(L1Norm { dim: 4, weight: 2.5 }),
            Box::new(ScaledSqNorm::half(4)),
            Box::new(ScaledSqNorm { dim: 4, c: 3.0 }),
            Box::new(NonnegIndicator { dim: 4 }),
            Box::new(Zero { dim: 4 }),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in &oracles {
            for _ in 0..5 {
                let t = rng.gen_range(0.05..3.0);
                let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let v = g.prox(t, &u);
                let best = moreau_objective(g.as_ref(), t, &u, &v);
                for _ in 0..100 {
                    let mut w: Vec<f64> = v.iter().map(|x| x + rng.gen_range(-1.0..1.0)).collect();
                    if g.is_indicator() {
                        w.iter_mut().for_each(|x| *x = x.max(0.0));
                    }
                    assert!(best <= moreau_objective(g.as_ref(), t, &u, &w) + 1e-10);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn library_proxes_are_nonexpansive(
            t in 0.01f64..5.0,
            u in proptest::collection::vec(-10.0f64..10.0, 3),
            v in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let d = crate::linalg::dist(&u, &v);
            for (pu, pv) in [
                (prox_l1(t, &u), prox_l1(t, &v)),
                (prox_sqnorm(t, &u), prox_sqnorm(t, &v)),
                (prox_indicator_nonneg(t, &u), prox_indicator_nonneg(t, &v)),
            ] {
                prop_assert!(crate::linalg::dist(&pu, &pv) <= d + 1e-9);
            }
        }
    }
}
