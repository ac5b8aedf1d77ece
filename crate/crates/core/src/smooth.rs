//! Smooth convex terms: gradients and values.

use std::sync::Arc;

use crate::linalg::{self, LinearOperator};
use crate::problem::SmoothOracle;

#[derive(Debug, Clone, Copy)]
pub struct Zero {
    pub dim: usize,
}

impl SmoothOracle for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn grad(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn value(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `(c/2)‖x‖²`
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

impl SmoothOracle for ScaledSqNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        linalg::scale(self.c, x)
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(0.5 * self.c * linalg::norm_sq(x))
    }
    fn quadratic_scale(&self) -> Option<f64> {
        Some(self.c)
    }
}

/// `½‖Ax − b‖²`
#[derive(Clone)]
pub struct LeastSquares {
    a: Arc<dyn LinearOperator>,
    b: Vec<f64>,
}

impl LeastSquares {
    pub fn new(a: Arc<dyn LinearOperator>, b: Vec<f64>) -> Self {
        assert_eq!(a.rows(), b.len(), "least squares: rows(A) != len(b)");
        Self { a, b }
    }

    pub fn operator(&self) -> &Arc<dyn LinearOperator> {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.apply(x);
        linalg::axpy(-1.0, &self.b, &mut r);
        r
    }
}

impl SmoothOracle for LeastSquares {
    fn dim(&self) -> usize {
        self.a.cols()
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.a.apply_t(&self.residual(x))
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(0.5 * linalg::norm_sq(&self.residual(x)))
    }
}

/// `½‖Lx‖² + (shift/2)‖x‖²`, i.e. `½⟨x, (LᵀL + shift·I)x⟩` without forming
/// the matrix.
#[derive(Clone)]
pub struct GramQuadratic {
    l: Arc<dyn LinearOperator>,
    shift: f64,
}

impl GramQuadratic {
    pub fn new(l: Arc<dyn LinearOperator>, shift: f64) -> Self {
        Self { l, shift }
    }
}

impl SmoothOracle for GramQuadratic {
    fn dim(&self) -> usize {
        self.l.cols()
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.l.apply_t(&self.l.apply(x));
        if self.shift != 0.0 {
            linalg::axpy(self.shift, x, &mut g);
        }
        g
    }
    fn value(&self, x: &[f64]) -> Option<f64> {
        Some(0.5 * linalg::norm_sq(&self.l.apply(x)) + 0.5 * self.shift * linalg::norm_sq(x))
    }
}

/// `log(1 + eᶻ)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss `(1/m) Σ softplus(aᵢᵀw) − yᵢ·aᵢᵀw` with labels in `{0,1}`.
///
/// This equals the negative log-likelihood
/// `−(1/m) Σ [yᵢ log sᵢ(w) + (1−yᵢ) log(1−sᵢ(w))]`.
#[derive(Clone)]
pub struct Logistic {
    a: Arc<dyn LinearOperator>,
    y: Vec<f64>,
}

impl Logistic {
    pub fn new(a: Arc<dyn LinearOperator>, y: Vec<f64>) -> Self {
        assert_eq!(a.rows(), y.len(), "logistic: rows(A) != len(y)");
        Self { a, y }
    }

    pub fn samples(&self) -> usize {
        self.y.len()
    }
}

impl SmoothOracle for Logistic {
    fn dim(&self) -> usize {
        self.a.cols()
    }
    fn grad(&self, w: &[f64]) -> Vec<f64> {
        let m = self.y.len() as f64;
        let z = self.a.apply(w);
        let r: Vec<f64> = z
            .iter()
            .zip(&self.y)
            .map(|(zi, yi)| (sigmoid(*zi) - yi) / m)
            .collect();
        self.a.apply_t(&r)
    }
    fn value(&self, w: &[f64]) -> Option<f64> {
        let m = self.y.len() as f64;
        let z = self.a.apply(w);
        Some(
            z.iter()
                .zip(&self.y)
                .map(|(zi, yi)| softplus(*zi) - yi * zi)
                .sum::<f64>()
                / m,
        )
    }
}
