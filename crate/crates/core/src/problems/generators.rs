//! Seeded synthetic instances.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, ForwardDifference, LinearOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid dimensions: {0}")]
    DimensionError(String),
    #[error("unsupported integral equation kind {0:?} (expected phillips, foxgood or baart)")]
    UnsupportedKind(String),
}

/// Underdetermined least squares with a planted sparse vector.
///
/// Construction: a uniform dual vector `y*` (unit norm) and a uniform
/// matrix `B ∈ [−1,1]^{m×n}` give `v = Bᵀy*`. The `n_star` columns with the
/// largest `|v_i|` are rescaled so that `|a_iᵀy*| = 1`; the remaining
/// columns are rescaled so that `|a_iᵀy*| < 1`. With
/// `x*_i = ξ_i·sign(a_iᵀy*)/√n_star` on the support (`ξ_i` uniform) and
/// `b = y* + Ax*`, the vector `x*` solves `min ½‖Ax − b‖² + ‖x‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInverseInstance {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub x_gen: Vec<f64>,
    pub seed: u64,
    /// `‖A‖²` by power iteration.
    pub l_f2: f64,
}

pub fn gen_linear_inverse(m: usize, n: usize, n_star: usize, seed: u64) -> Result<LinearInverseInstance, GenError> {
    if m == 0 || n == 0 || n_star == 0 || n_star > m.min(n) {
        return Err(GenError::DimensionError(format!(
            "need 0 < n_star <= min(m, n), got m={m}, n={n}, n_star={n_star}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ny = linalg::norm(&y);
    y.iter_mut().for_each(|v| *v /= ny);
    let mut a = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let v = a.apply_t(&y);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
    let mut on_support = vec![false; n];
    for &i in &order[..n_star] {
        on_support[i] = true;
    }
    for j in 0..n {
        let vj = v[j].abs();
        let s = if on_support[j] {
            1.0 / vj
        } else if vj > 0.1 {
            rng.gen_range(0.0..1.0) / vj
        } else {
            1.0
        };
        a.scale_col(j, s);
    }
    let mut x = vec![0.0; n];
    let scale = 1.0 / (n_star as f64).sqrt();
    for j in 0..n {
        if on_support[j] {
            x[j] = rng.gen_range(0.0..1.0) * scale * v[j].signum();
        }
    }
    let ax = a.apply(&x);
    let b: Vec<f64> = y.iter().zip(&ax).map(|(yi, ai)| yi + ai).collect();
    let l_f2 = linalg::spectral_norm_sq_default(&a);
    Ok(LinearInverseInstance {
        a,
        b,
        x_gen: x,
        seed,
        l_f2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegralKind {
    Phillips,
    Foxgood,
    Baart,
}

impl IntegralKind {
    pub const ALL: [IntegralKind; 3] = [IntegralKind::Phillips, IntegralKind::Foxgood, IntegralKind::Baart];

    pub fn name(self) -> &'static str {
        match self {
            IntegralKind::Phillips => "phillips",
            IntegralKind::Foxgood => "foxgood",
            IntegralKind::Baart => "baart",
        }
    }
}

impl fmt::Display for IntegralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegralKind {
    type Err = GenError;
    fn from_str(s: &str) -> Result<Self, GenError> {
        match s {
            "phillips" => Ok(IntegralKind::Phillips),
            "foxgood" => Ok(IntegralKind::Foxgood),
            "baart" => Ok(IntegralKind::Baart),
            other => Err(GenError::UnsupportedKind(other.to_string())),
        }
    }
}

/// Midpoint-rule discretization of a first-kind Fredholm equation.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralEquationInstance {
    pub kind: IntegralKind,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub x_exact: Vec<f64>,
    pub l: ForwardDifference,
    pub seed: u64,
    pub noise: f64,
    pub l_f2: f64,
}

impl IntegralEquationInstance {
    /// `Q1 x = LᵀLx`
    pub fn q1_apply(&self, x: &[f64]) -> Vec<f64> {
        self.l.gram_apply(x)
    }

    /// `Q x = (LᵀL + I)x`
    pub fn q_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.q1_apply(x);
        linalg::axpy(1.0, x, &mut out);
        out
    }
}

/// `λ_max(LᵀL) = 2 − 2cos(π(n−1)/n)` for the forward difference on `n` points.
pub fn forward_difference_norm_sq(n: usize) -> f64 {
    2.0 - 2.0 * (std::f64::consts::PI * (n as f64 - 1.0) / n as f64).cos()
}

/// Builds `A` and `x_exact` for the given kind; `b = A·x_exact` plus optional
/// Gaussian noise of relative level `noise` (seeded).
pub fn gen_integral_equation(
    kind: IntegralKind,
    n: usize,
    seed: u64,
    noise: f64,
) -> Result<IntegralEquationInstance, GenError> {
    use std::f64::consts::PI;
    if n < 8 {
        return Err(GenError::DimensionError(format!("need n >= 8, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(GenError::DimensionError(format!("noise level {noise} must be nonnegative")));
    }
    let nf = n as f64;
    let (a, x_exact) = match kind {
        IntegralKind::Phillips => {
            let phi = |x: f64| if x.abs() < 3.0 { 1.0 + (PI * x / 3.0).cos() } else { 0.0 };
            let h = 12.0 / nf;
            let t: Vec<f64> = (0..n).map(|i| -6.0 + (i as f64 + 0.5) * h).collect();
            let a = DenseMatrix::from_fn(n, n, |i, j| h * phi(t[i] - t[j]));
            (a, t.iter().map(|&ti| phi(ti)).collect())
        }
        IntegralKind::Foxgood => {
            let h = 1.0 / nf;
            let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
            let a = DenseMatrix::from_fn(n, n, |i, j| h * (t[i] * t[i] + t[j] * t[j]).sqrt());
            (a, t.clone())
        }
        IntegralKind::Baart => {
            let ht = PI / nf;
            let hs = 0.5 * PI / nf;
            let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * hs).collect();
            let t: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * ht).collect();
            let a = DenseMatrix::from_fn(n, n, |i, j| ht * (s[i] * t[j].cos()).exp());
            (a, t.iter().map(|tj| tj.sin()).collect())
        }
    };
    let mut b = a.apply(&x_exact);
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let s = noise * linalg::norm(&b) / linalg::norm(&e);
        linalg::axpy(s, &e, &mut b);
    }
    let l_f2 = linalg::spectral_norm_sq_default(&a);
    Ok(IntegralEquationInstance {
        kind,
        a,
        b,
        x_exact,
        l: ForwardDifference::new(n),
        seed,
        noise,
        l_f2,
    })
}

/// Box–Muller; keeps the dependency list to `rand` alone.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Dense binary classification data with labels in `{0, 1}` drawn from a
/// planted logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticInstance {
    pub a: DenseMatrix,
    pub labels: Vec<f64>,
    pub seed: u64,
}

pub fn gen_logistic(m: usize, n: usize, seed: u64) -> Result<LogisticInstance, GenError> {
    if m == 0 || n == 0 {
        return Err(GenError::DimensionError(format!("need m, n > 0, got m={m}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DenseMatrix::from_fn(m, n, |_, _| standard_normal(&mut rng));
    let w: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
    let z = a.apply(&w);
    let labels = z
        .iter()
        .map(|&zi| {
            let p = crate::smooth::sigmoid(zi);
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(LogisticInstance { a, labels, seed })
}
