//! Problem builders for the experiment families.
//!
//! Each builder can place a smooth upper cost either in the prox slot
//! (`g1 = φ1`, `f1 = 0`), which is how the proposed methods are run, or in
//! the smooth slot (`f1 = φ1`, `g1 = 0`), which is what the baselines need.

pub mod generators;
pub mod libsvm;
pub mod residual;

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, DenseMatrix, LinearOperator};
use crate::problem::{
    BilevelProblem, CompositeProx, GlobalModuli, KnownOptima, ProblemError, ProxOracle, SmoothOracle,
};
use crate::smooth::{GramQuadratic, LeastSquares, Logistic};
use crate::{prox, smooth};

pub use generators::{
    gen_integral_equation, gen_linear_inverse, gen_logistic, GenError, IntegralEquationInstance, IntegralKind,
    LinearInverseInstance, LogisticInstance,
};
pub use libsvm::{parse_libsvm, serialize_libsvm, ParseError, SparseDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// `g1 = φ1`, `f1 = 0`.
    ProxUpper,
    /// `f1 = φ1`, `g1 = 0`.
    SmoothUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperCost {
    /// `½‖·‖²`
    SqNorm,
    /// `‖·‖₁`
    L1,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("the {0:?} upper cost cannot be placed in the smooth slot")]
    NotSmooth(UpperCost),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Gen(#[from] GenError),
}

/// Upper `φ1 ∈ {½‖·‖², ‖·‖₁}` over a smooth lower level `f2` with `g2 = 0`.
fn assemble(
    f2: Arc<dyn SmoothOracle>,
    upper: UpperCost,
    form: Formulation,
    l_f2: f64,
    optima: KnownOptima,
) -> Result<BilevelProblem, BuildError> {
    let n = f2.dim();
    let g2: Arc<dyn ProxOracle> = Arc::new(prox::Zero { dim: n });
    let (f1, g1, composite, moduli): (Arc<dyn SmoothOracle>, Arc<dyn ProxOracle>, _, _) = match (form, upper) {
        (Formulation::ProxUpper, UpperCost::SqNorm) => (
            Arc::new(smooth::Zero { dim: n }),
            Arc::new(prox::ScaledSqNorm::half(n)),
            CompositeProx::G2Zero,
            GlobalModuli {
                l_f1: 0.0,
                mu_f1: 0.0,
                l_f2,
            },
        ),
        (Formulation::ProxUpper, UpperCost::L1) => (
            Arc::new(smooth::Zero { dim: n }),
            Arc::new(prox::L1Norm::new(n)),
            CompositeProx::G2Zero,
            GlobalModuli {
                l_f1: 0.0,
                mu_f1: 0.0,
                l_f2,
            },
        ),
        (Formulation::SmoothUpper, UpperCost::SqNorm) => (
            Arc::new(smooth::ScaledSqNorm::half(n)),
            Arc::new(prox::Zero { dim: n }),
            CompositeProx::G1Zero,
            GlobalModuli {
                l_f1: 1.0,
                mu_f1: 1.0,
                l_f2,
            },
        ),
        (Formulation::SmoothUpper, UpperCost::L1) => return Err(BuildError::NotSmooth(UpperCost::L1)),
    };
    Ok(BilevelProblem::new(f1, g1, f2, g2, composite)?
        .with_optima(optima)?
        .with_moduli(moduli))
}

/// Least squares lower level `½‖Ax − b‖²`.
pub fn least_squares(
    a: Arc<dyn LinearOperator>,
    b: Vec<f64>,
    upper: UpperCost,
    form: Formulation,
    optima: KnownOptima,
) -> Result<BilevelProblem, BuildError> {
    let l_f2 = linalg::spectral_norm_sq_default(a.as_ref());
    assemble(Arc::new(LeastSquares::new(a, b)), upper, form, l_f2, optima)
}

/// `min ½‖x‖²` over `argmin ½(x1 + x2 − 2)²`; solution `(1, 1)`.
pub fn min_norm_line(form: Formulation) -> BilevelProblem {
    let a = DenseMatrix::from_row_major(1, 2, vec![1.0, 1.0]);
    let optima = KnownOptima {
        cost1_star: Some(1.0),
        cost1_inf: Some(0.0),
        cost2_star: Some(0.0),
    };
    assemble(
        Arc::new(LeastSquares::new(Arc::new(a), vec![2.0])),
        UpperCost::SqNorm,
        form,
        2.0,
        optima,
    )
    .expect("static instance is consistent")
}

/// `min ‖x‖₁` over `argmin ½(x1 + 2x2 − 2)²`; solution `(0, 1)`.
pub fn min_l1_line() -> BilevelProblem {
    let a = DenseMatrix::from_row_major(1, 2, vec![1.0, 2.0]);
    let optima = KnownOptima {
        cost1_star: Some(1.0),
        cost1_inf: Some(0.0),
        cost2_star: Some(0.0),
    };
    assemble(
        Arc::new(LeastSquares::new(Arc::new(a), vec![2.0])),
        UpperCost::L1,
        Formulation::ProxUpper,
        5.0,
        optima,
    )
    .expect("static instance is consistent")
}

/// Linear inverse problem on a generated instance. Lower optimal value 0
/// (the system is consistent for `m < n`); `inf φ1 = 0`.
pub fn linear_inverse(
    inst: &LinearInverseInstance,
    upper: UpperCost,
    form: Formulation,
) -> Result<BilevelProblem, BuildError> {
    let (m, n) = (inst.a.rows(), inst.a.cols());
    let optima = KnownOptima {
        cost1_star: None,
        cost1_inf: Some(0.0),
        cost2_star: if m < n { Some(0.0) } else { None },
    };
    let f2 = Arc::new(LeastSquares::new(Arc::new(inst.a.clone()), inst.b.clone()));
    assemble(f2, upper, form, inst.l_f2, optima)
}

/// Logistic regression lower level with `L_f2 = ‖A‖²/(4m)`.
pub fn logistic(
    a: Arc<dyn LinearOperator>,
    labels: Vec<f64>,
    upper: UpperCost,
    form: Formulation,
) -> Result<BilevelProblem, BuildError> {
    let m = a.rows() as f64;
    let l_f2 = linalg::spectral_norm_sq_default(a.as_ref()) / (4.0 * m);
    let optima = KnownOptima {
        cost1_star: None,
        cost1_inf: Some(0.0),
        cost2_star: None,
    };
    assemble(Arc::new(Logistic::new(a, labels)), upper, form, l_f2, optima)
}

pub fn logistic_from_dataset(ds: &SparseDataset, upper: UpperCost, form: Formulation) -> Result<BilevelProblem, BuildError> {
    logistic(ds.to_csr(), ds.labels.clone(), upper, form)
}

/// `min ½‖x‖²_Q` over `argmin_{w ≥ 0} ½‖Aw − b‖²` with `Q = LᵀL + I`.
///
/// Prox form: `f1 = ½⟨x, LᵀLx⟩`, `g1 = ½‖·‖²` with the quadratic-scaling
/// composite prox. Smooth form: `f1 = ½‖x‖²_Q`, `g1 = 0`. With noiseless
/// data the lower optimal value is 0.
pub fn integral_equation(inst: &IntegralEquationInstance, form: Formulation) -> Result<BilevelProblem, BuildError> {
    let n = inst.a.cols();
    let l: Arc<dyn LinearOperator> = Arc::new(inst.l);
    let l_sq = generators::forward_difference_norm_sq(n);
    let f2: Arc<dyn SmoothOracle> = Arc::new(LeastSquares::new(Arc::new(inst.a.clone()), inst.b.clone()));
    let g2: Arc<dyn ProxOracle> = Arc::new(prox::NonnegIndicator { dim: n });
    let optima = KnownOptima {
        cost1_star: None,
        cost1_inf: Some(0.0),
        cost2_star: if inst.noise == 0.0 { Some(0.0) } else { None },
    };
    let p = match form {
        Formulation::ProxUpper => BilevelProblem::new(
            Arc::new(GramQuadratic::new(l, 0.0)),
            Arc::new(prox::ScaledSqNorm::half(n)),
            f2,
            g2,
            CompositeProx::G1QuadraticScaling { c: 1.0 },
        )?
        .with_moduli(GlobalModuli {
            l_f1: l_sq,
            mu_f1: 0.0,
            l_f2: inst.l_f2,
        }),
        Formulation::SmoothUpper => BilevelProblem::new(
            Arc::new(GramQuadratic::new(l, 1.0)),
            Arc::new(prox::Zero { dim: n }),
            f2,
            g2,
            CompositeProx::G1Zero,
        )?
        .with_moduli(GlobalModuli {
            l_f1: l_sq + 1.0,
            mu_f1: 1.0,
            l_f2: inst.l_f2,
        }),
    };
    Ok(p.with_optima(optima)?)
}
