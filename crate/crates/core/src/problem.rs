//! Oracles and the bilevel problem container.
//!
//! A problem is the quadruple `(f1, g1, f2, g2)`: the upper level minimizes
//! `φ1 = f1 + g1` over the minimizers of the lower level `φ2 = f2 + g2`.
//! Solvers only ever see the penalized pair `fσ = σ·f1 + f2`,
//! `gσ = σ·g1 + g2`; how the prox of `gσ` is evaluated is declared by the
//! caller through [`CompositeProx`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;

/// Absolute tolerance for oracle consistency checks.
pub const TOL_NUM: f64 = 1e-9;

/// A convex, continuously differentiable term.
pub trait SmoothOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// `None` when the oracle cannot evaluate its value.
    fn value(&self, x: &[f64]) -> Option<f64>;
    fn has_value(&self) -> bool {
        true
    }
    fn is_zero(&self) -> bool {
        false
    }
    /// `Some(c)` iff the oracle is exactly `(c/2)‖·‖²`.
    fn quadratic_scale(&self) -> Option<f64> {
        None
    }
}

/// A proper closed convex term with a computable proximal map.
pub trait ProxOracle: Send + Sync {
    fn dim(&self) -> usize;
    /// `argmin_w g(w) + ‖w − u‖²/(2t)`
    fn prox(&self, t: f64, u: &[f64]) -> Vec<f64>;
    /// Extended-real value; `None` when not available.
    fn value(&self, x: &[f64]) -> Option<f64>;
    fn is_zero(&self) -> bool {
        false
    }
    fn is_indicator(&self) -> bool {
        false
    }
    /// `Some(c)` iff the oracle is exactly `(c/2)‖·‖²`.
    fn quadratic_scale(&self) -> Option<f64> {
        None
    }
}

/// User-supplied prox of `t·(σ·g1 + g2)`: called as `f(t, σ, u)`.
pub type CustomProx = Arc<dyn Fn(f64, f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// How to evaluate `prox_{t(σ g1 + g2)}`.
#[derive(Clone)]
pub enum CompositeProx {
    /// `g1 ≡ 0`: the prox of `t·g2`.
    G1Zero,
    /// `g2 ≡ 0`: the prox of `tσ·g1` (identity when `σ = 0`).
    G2Zero,
    /// `g1 = (c/2)‖·‖²`: `prox_{t/(1+tσc)·g2}(u/(1+tσc))`.
    G1QuadraticScaling { c: f64 },
    Custom(CustomProx),
}

impl fmt::Debug for CompositeProx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompositeProx::G1Zero => f.write_str("G1Zero"),
            CompositeProx::G2Zero => f.write_str("G2Zero"),
            CompositeProx::G1QuadraticScaling { c } => write!(f, "G1QuadraticScaling(c={c})"),
            CompositeProx::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("composite prox strategy {strategy} does not match the oracles: {reason}")]
    StrategyMismatch { strategy: String, reason: String },
    #[error("oracle dimensions disagree: {0:?}")]
    DimensionMismatch([usize; 4]),
    #[error("non-finite gradient at component {index}")]
    NonFiniteGradient { index: usize },
    #[error("known optima inconsistent: cost1_star {star} < cost1_inf {inf}")]
    InconsistentOptima { star: f64, inf: f64 },
}

/// Checks that `strategy` is consistent with the declared structure of `g1`, `g2`.
pub fn check_strategy(
    strategy: &CompositeProx,
    g1: &dyn ProxOracle,
    g2: &dyn ProxOracle,
) -> Result<(), ProblemError> {
    let mismatch = |reason: &str| ProblemError::StrategyMismatch {
        strategy: format!("{strategy:?}"),
        reason: reason.to_string(),
    };
    match strategy {
        CompositeProx::G1Zero if !g1.is_zero() => Err(mismatch("g1 is not the zero function")),
        CompositeProx::G2Zero if !g2.is_zero() => Err(mismatch("g2 is not the zero function")),
        CompositeProx::G1QuadraticScaling { c } => match g1.quadratic_scale() {
            Some(gc) if gc == *c && *c > 0.0 => Ok(()),
            Some(gc) => Err(mismatch(&format!("g1 has scale {gc}, strategy declares {c}"))),
            None => Err(mismatch("g1 is not (c/2)‖·‖²")),
        },
        _ => Ok(()),
    }
}

/// Exact prox of `t·(σ·g1 + g2)` at `u` under the declared structure.
pub fn composite_prox(
    strategy: &CompositeProx,
    g1: &dyn ProxOracle,
    g2: &dyn ProxOracle,
    t: f64,
    sigma: f64,
    u: &[f64],
) -> Result<Vec<f64>, ProblemError> {
    debug_assert!(t > 0.0 && sigma >= 0.0);
    check_strategy(strategy, g1, g2)?;
    Ok(match strategy {
        CompositeProx::G1Zero => g2.prox(t, u),
        CompositeProx::G2Zero => {
            if sigma == 0.0 {
                u.to_vec()
            } else {
                g1.prox(t * sigma, u)
            }
        }
        CompositeProx::G1QuadraticScaling { c } => {
            let d = 1.0 + t * sigma * c;
            let scaled: Vec<f64> = u.iter().map(|v| v / d).collect();
            g2.prox(t / d, &scaled)
        }
        CompositeProx::Custom(f) => f(t, sigma, u),
    })
}

/// Call counters. Atomic so that a problem can be shared by reference.
#[derive(Debug, Default)]
pub struct Counters {
    grad_f1: AtomicU64,
    grad_f2: AtomicU64,
    prox: AtomicU64,
    f_value: AtomicU64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CounterSnapshot {
    pub grad_f1: u64,
    pub grad_f2: u64,
    pub prox: u64,
    pub f_value: u64,
}

impl Counters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            grad_f1: self.grad_f1.load(Ordering::Relaxed),
            grad_f2: self.grad_f2.load(Ordering::Relaxed),
            prox: self.prox.load(Ordering::Relaxed),
            f_value: self.f_value.load(Ordering::Relaxed),
        }
    }

    fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

/// Optimal values known in closed form (used by tests and gap traces).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnownOptima {
    /// Optimal bilevel value `inf_{X2} φ1`, when known.
    pub cost1_star: Option<f64>,
    /// `inf φ1` over `dom φ2`.
    pub cost1_inf: Option<f64>,
    /// `inf φ2`.
    pub cost2_star: Option<f64>,
}

impl KnownOptima {
    pub const NONE: KnownOptima = KnownOptima {
        cost1_star: None,
        cost1_inf: None,
        cost2_star: None,
    };
}

/// Global moduli, where the builder knows them; zero means unknown (or, for
/// `l_f1` with `f1 ≡ 0`, exactly zero).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GlobalModuli {
    pub l_f1: f64,
    pub mu_f1: f64,
    pub l_f2: f64,
}

/// `(∇f1(x), ∇f2(x), σ∇f1(x) + ∇f2(x))`
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedGrad {
    pub grad_f1: Vec<f64>,
    pub grad_f2: Vec<f64>,
    pub grad_fk: Vec<f64>,
}

/// Combines cached constituent gradients into `σ∇f1 + ∇f2`.
pub fn combine(sigma: f64, g1: &[f64], g2: &[f64]) -> Vec<f64> {
    g1.iter().zip(g2).map(|(a, b)| sigma * a + b).collect()
}

pub struct BilevelProblem {
    pub f1: Arc<dyn SmoothOracle>,
    pub g1: Arc<dyn ProxOracle>,
    pub f2: Arc<dyn SmoothOracle>,
    pub g2: Arc<dyn ProxOracle>,
    pub composite: CompositeProx,
    pub optima: KnownOptima,
    pub moduli: GlobalModuli,
    counters: Counters,
}

impl fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("dim", &self.dim())
            .field("composite", &self.composite)
            .field("optima", &self.optima)
            .field("moduli", &self.moduli)
            .field("counters", &self.counters.snapshot())
            .finish()
    }
}

impl BilevelProblem {
    pub fn new(
        f1: Arc<dyn SmoothOracle>,
        g1: Arc<dyn ProxOracle>,
        f2: Arc<dyn SmoothOracle>,
        g2: Arc<dyn ProxOracle>,
        composite: CompositeProx,
    ) -> Result<Self, ProblemError> {
        let dims = [f1.dim(), g1.dim(), f2.dim(), g2.dim()];
        if dims.iter().any(|d| *d != dims[0]) || dims[0] == 0 {
            return Err(ProblemError::DimensionMismatch(dims));
        }
        check_strategy(&composite, g1.as_ref(), g2.as_ref())?;
        Ok(Self {
            f1,
            g1,
            f2,
            g2,
            composite,
            optima: KnownOptima::NONE,
            moduli: GlobalModuli::default(),
            counters: Counters::default(),
        })
    }

    pub fn with_optima(mut self, optima: KnownOptima) -> Result<Self, ProblemError> {
        if let (Some(star), Some(inf)) = (optima.cost1_star, optima.cost1_inf) {
            if star < inf {
                return Err(ProblemError::InconsistentOptima { star, inf });
            }
        }
        self.optima = optima;
        Ok(self)
    }

    pub fn with_moduli(mut self, moduli: GlobalModuli) -> Self {
        self.moduli = moduli;
        self
    }

    /// Same oracles, fresh counters. Each solver run should own one fork.
    pub fn fork(&self) -> Self {
        Self {
            f1: Arc::clone(&self.f1),
            g1: Arc::clone(&self.g1),
            f2: Arc::clone(&self.f2),
            g2: Arc::clone(&self.g2),
            composite: self.composite.clone(),
            optima: self.optima,
            moduli: self.moduli,
            counters: Counters::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.f1.dim()
    }

    pub fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }

    /// Both constituent gradients and their σ-combination; one `∇f2` call.
    pub fn eval_penalized_grad(&self, sigma: f64, x: &[f64]) -> Result<PenalizedGrad, ProblemError> {
        let grad_f1 = self.grad_f1(x)?;
        let grad_f2 = self.grad_f2(x)?;
        let grad_fk = combine(sigma, &grad_f1, &grad_f2);
        check_finite(&grad_fk)?;
        Ok(PenalizedGrad {
            grad_f1,
            grad_f2,
            grad_fk,
        })
    }

    pub fn grad_f1(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        if self.f1.is_zero() {
            return Ok(vec![0.0; self.dim()]);
        }
        Counters::bump(&self.counters.grad_f1);
        let g = self.f1.grad(x);
        check_finite(&g)?;
        Ok(g)
    }

    pub fn grad_f2(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Counters::bump(&self.counters.grad_f2);
        let g = self.f2.grad(x);
        check_finite(&g)?;
        Ok(g)
    }

    /// Counted prox of `t·(σ g1 + g2)`.
    pub fn prox(&self, t: f64, sigma: f64, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Counters::bump(&self.counters.prox);
        composite_prox(&self.composite, self.g1.as_ref(), self.g2.as_ref(), t, sigma, u)
    }

    /// Counted value of `σ f1 + f2` (used by methods with function-value
    /// linesearches). Returns `(f1(x), f2(x))`.
    pub fn eval_smooth_values(&self, x: &[f64]) -> Option<(f64, f64)> {
        Counters::bump(&self.counters.f_value);
        Some((self.f1.value(x)?, self.f2.value(x)?))
    }

    /// Uncounted `φ1(x)`, for reporting.
    pub fn cost1(&self, x: &[f64]) -> Option<f64> {
        Some(self.f1.value(x)? + self.g1.value(x)?)
    }

    /// Uncounted `φ2(x)`, for reporting.
    pub fn cost2(&self, x: &[f64]) -> Option<f64> {
        Some(self.f2.value(x)? + self.g2.value(x)?)
    }
}

fn check_finite(g: &[f64]) -> Result<(), ProblemError> {
    match g.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ProblemError::NonFiniteGradient { index }),
        None => Ok(()),
    }
}

/// Largest relative error between `oracle.grad` and central finite
/// differences of `oracle.value`, over `points` seeded random points in
/// `[-scale, scale]ⁿ`. The error is measured as
/// `|g_fd − g| / max(1, |g|∞)` componentwise.
pub fn finite_difference_check(oracle: &dyn SmoothOracle, points: usize, scale: f64, seed: u64) -> f64 {
    let n = oracle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let g = oracle.grad(&x);
        let gmax = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut xp = x.clone();
        for i in 0..n {
            let h = 1e-5 * (1.0 + x[i].abs());
            xp[i] = x[i] + h;
            let fp = oracle.value(&xp).expect("finite-difference check needs values");
            xp[i] = x[i] - h;
            let fm = oracle.value(&xp).expect("finite-difference check needs values");
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / gmax);
        }
    }
    worst
}

/// Smallest sampled `⟨∇f(x) − ∇f(y), x − y⟩`; negative values beyond
/// `TOL_NUM` indicate a non-monotone (non-convex) gradient.
pub fn min_monotonicity_gap(oracle: &dyn SmoothOracle, pairs: usize, scale: f64, seed: u64) -> f64 {
    let n = oracle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let dg = linalg::sub(&oracle.grad(&x), &oracle.grad(&y));
        worst = worst.min(linalg::dot(&dg, &linalg::sub(&x, &y)));
    }
    worst
}
