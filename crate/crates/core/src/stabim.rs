//! Static-stepsize bilevel proximal gradient method.
//!
//! With global moduli `L_f1`, `L_f2` the stepsize `ν/(σ_{k+1}L_f1 + L_f2)`
//! needs no linesearch, and it grows as the penalty schedule decreases.

use serde::Serialize;

use crate::adabim::local_moduli;
use crate::linalg;
use crate::problem::{combine, BilevelProblem};
use crate::problems::residual::{lower_residual, ProxGradStep};
use crate::schedule::PenaltySchedule;
use crate::solver::{check_unit_interval, BilevelSolver, SolverError, StepInfo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaBimParams {
    pub l_f1: f64,
    pub l_f2: f64,
    pub nu: f64,
}

impl StaBimParams {
    /// Moduli taken from the problem.
    pub fn from_problem(problem: &BilevelProblem) -> Self {
        Self {
            l_f1: problem.moduli.l_f1,
            l_f2: problem.moduli.l_f2,
            nu: 0.98,
        }
    }

    pub fn stepsize(&self, sigma: f64) -> f64 {
        self.nu / (sigma * self.l_f1 + self.l_f2)
    }
}

#[derive(Debug, Clone)]
pub struct StaBim {
    params: StaBimParams,
    schedule: PenaltySchedule,
    x: Vec<f64>,
    alpha: f64,
    grad_f1: Vec<f64>,
    grad_f2: Vec<f64>,
}

impl StaBim {
    pub fn init(
        problem: &BilevelProblem,
        x0: &[f64],
        params: StaBimParams,
        schedule: PenaltySchedule,
    ) -> Result<Self, SolverError> {
        check_unit_interval("stabim.nu", params.nu)?;
        if !(params.l_f1 >= 0.0 && params.l_f2 > 0.0 && params.l_f1.is_finite() && params.l_f2.is_finite()) {
            return Err(SolverError::InvalidParameter(format!(
                "stabim moduli L_f1 = {}, L_f2 = {} must be nonnegative and positive",
                params.l_f1, params.l_f2
            )));
        }
        let g = problem.eval_penalized_grad(schedule.current(), x0)?;
        Ok(Self {
            alpha: params.stepsize(schedule.current()),
            params,
            schedule,
            x: x0.to_vec(),
            grad_f1: g.grad_f1,
            grad_f2: g.grad_f2,
        })
    }

    pub fn stabim_step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        let sigma = self.schedule.next_sigma();
        let alpha = self.params.stepsize(sigma);
        let grad_fk = combine(sigma, &self.grad_f1, &self.grad_f2);
        let u: Vec<f64> = self.x.iter().zip(&grad_fk).map(|(x, g)| x - alpha * g).collect();
        let x_next = problem.prox(alpha, sigma, &u)?;
        let g = problem.eval_penalized_grad(sigma, &x_next)?;

        let moduli = local_moduli(
            &self.x,
            &x_next,
            (&self.grad_f1, &self.grad_f2),
            (&g.grad_f1, &g.grad_f2),
            sigma,
        );
        let lower_resid = lower_residual(
            problem,
            &ProxGradStep {
                x: &self.x,
                x_next: &x_next,
                alpha,
                sigma,
                grad_fk: &grad_fk,
                grad_f2_next: &g.grad_f2,
            },
        );
        let step_norm = linalg::dist(&self.x, &x_next);
        self.x = x_next;
        self.alpha = alpha;
        self.grad_f1 = g.grad_f1;
        self.grad_f2 = g.grad_f2;
        Ok(StepInfo {
            alpha,
            sigma,
            backtracks: 0,
            step_norm,
            lower_resid,
            lipschitz_estimate: Some(moduli.l),
            rho: None,
            radicand: None,
        })
    }
}

impl BilevelSolver for StaBim {
    fn name(&self) -> &'static str {
        "stabim"
    }
    fn iterate(&self) -> &[f64] {
        &self.x
    }
    fn sigma(&self) -> f64 {
        self.schedule.current()
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        self.stabim_step(problem)
    }
}
