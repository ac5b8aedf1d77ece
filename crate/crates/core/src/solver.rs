//! The interface shared by every iterative method in the crate.

use thiserror::Error;

use crate::problem::{BilevelProblem, ProblemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("linesearch gave up after {limit} candidates")]
    BacktrackLimit { limit: u32 },
    #[error("stepsize radicand {value} is negative")]
    RadicandViolation { value: f64 },
    #[error("consecutive iterates coincide; local moduli are undefined")]
    DegenerateStep,
    #[error("{method} is not applicable: {reason}")]
    Inapplicable { method: &'static str, reason: String },
    #[error("{0} requires function values, which the oracle does not provide")]
    MissingValue(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl SolverError {
    /// Short machine-readable code used in run reports.
    pub fn code(&self) -> &'static str {
        match self {
            SolverError::Problem(ProblemError::NonFiniteGradient { .. }) => "non_finite_gradient",
            SolverError::Problem(_) => "problem",
            SolverError::BacktrackLimit { .. } => "backtrack_limit",
            SolverError::RadicandViolation { .. } => "radicand_violation",
            SolverError::DegenerateStep => "degenerate_step",
            SolverError::Inapplicable { .. } => "inapplicable",
            SolverError::MissingValue(_) => "missing_value",
            SolverError::InvalidParameter(_) => "invalid_parameter",
        }
    }
}

/// What one accepted iteration did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepInfo {
    /// Accepted stepsize (`γ` for iterative-3D, `α(2)` for BiGSAM).
    pub alpha: f64,
    /// Inverse penalty used by the step, `σ_{k+1}`.
    pub sigma: f64,
    /// Rejected candidates before acceptance.
    pub backtracks: u64,
    /// `‖x^{k+1} − x^k‖`
    pub step_norm: f64,
    /// Lower-level optimality measure at `x^{k+1}`.
    pub lower_resid: f64,
    /// `ℓ_{k+1}` between `x^k` and `x^{k+1}`, when both gradients are at hand.
    pub lipschitz_estimate: Option<f64>,
    /// `ρ_{k+1} = σ_{k+1}α_{k+1}/(σ_kα_k)` (adaptive method only).
    pub rho: Option<f64>,
    /// Radicand of the second stepsize branch (adaptive method only).
    pub radicand: Option<f64>,
}

pub trait BilevelSolver: Send {
    fn name(&self) -> &'static str;
    /// Current iterate `x^k`.
    fn iterate(&self) -> &[f64];
    /// Current inverse penalty `σ_k`.
    fn sigma(&self) -> f64;
    /// Current stepsize.
    fn alpha(&self) -> f64;
    fn step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError>;
}

pub(crate) fn check_unit_interval(name: &str, v: f64) -> Result<(), SolverError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(SolverError::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<(), SolverError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SolverError::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}
