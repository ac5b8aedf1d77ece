//! Generic outer loop: budgets, stopping rule, checkpointed trace.

use std::time::Instant;

use serde::Serialize;

use crate::linalg;
use crate::problem::BilevelProblem;
use crate::solver::{BilevelSolver, StepInfo};
use crate::trace::{Checkpoints, RunReport, Termination, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub max_grad_evals: Option<u64>,
    pub max_iters: Option<u64>,
    pub wall_clock_s: Option<f64>,
    /// Stop once `σ ≤ sigma_tol` and `‖Δx‖/α ≤ r_tol·(1 + ‖x⁺‖)`.
    pub sigma_tol: f64,
    pub r_tol: f64,
    pub use_tolerance: bool,
    /// Record `time_s`; when off, the column is written as zero.
    pub record_time: bool,
    /// Record every iteration instead of the checkpoint grid.
    pub record_all: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_grad_evals: Some(100_000),
            max_iters: None,
            wall_clock_s: None,
            sigma_tol: 1e-6,
            r_tol: 1e-8,
            use_tolerance: true,
            record_time: true,
            record_all: false,
        }
    }
}

impl RunOptions {
    pub fn grad_budget(n: u64) -> Self {
        Self {
            max_grad_evals: Some(n),
            ..Self::default()
        }
    }

    pub fn iter_budget(n: u64) -> Self {
        Self {
            max_grad_evals: None,
            max_iters: Some(n),
            ..Self::default()
        }
    }
}

/// What an observer sees after each accepted iteration.
pub struct StepObservation<'a> {
    /// Index of the new iterate.
    pub k: u64,
    pub x_prev: &'a [f64],
    pub x_next: &'a [f64],
    pub info: &'a StepInfo,
    pub problem: &'a BilevelProblem,
}

pub fn run(problem: &BilevelProblem, solver: &mut dyn BilevelSolver, options: &RunOptions) -> RunReport {
    run_observed(problem, solver, options, |_| {})
}

/// Like [`run`], calling `observe` after every accepted iteration.
pub fn run_observed(
    problem: &BilevelProblem,
    solver: &mut dyn BilevelSolver,
    options: &RunOptions,
    mut observe: impl FnMut(&StepObservation<'_>),
) -> RunReport {
    let start = Instant::now();
    let mut checkpoints = Checkpoints::default();
    let mut trace = Vec::new();
    let mut backtracks = 0u64;
    let mut k = 0u64;
    let mut last_recorded = true;
    let mut last: Option<TraceRecord> = None;
    let mut error = None;

    let record = |k: u64, info: &StepInfo, x: &[f64], backtracks: u64| {
        let c = problem.counters();
        let cost1 = problem.cost1(x).unwrap_or(f64::NAN);
        TraceRecord {
            k,
            grad_f2_evals: c.grad_f2,
            f_value_evals: c.f_value,
            backtracks_cum: backtracks,
            alpha: info.alpha,
            sigma: info.sigma,
            cost1_gap: match problem.optima.cost1_star {
                Some(star) => cost1 - star,
                None => cost1,
            },
            lower_resid: info.lower_resid,
            time_s: if options.record_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        }
    };

    let termination = loop {
        if options.max_iters.is_some_and(|m| k >= m) {
            break Termination::BudgetIters;
        }
        if options.max_grad_evals.is_some_and(|m| problem.counters().grad_f2 >= m) {
            break Termination::BudgetGradevals;
        }
        if options.wall_clock_s.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            break Termination::BudgetTime;
        }
        let x_prev = solver.iterate().to_vec();
        let info = match solver.step(problem) {
            Ok(info) => info,
            Err(e) => {
                let code = e.code().to_string();
                error = Some(e.to_string());
                break Termination::Error(code);
            }
        };
        k += 1;
        backtracks += info.backtracks;
        let x_next = solver.iterate();
        observe(&StepObservation {
            k,
            x_prev: &x_prev,
            x_next,
            info: &info,
            problem,
        });

        let rec = record(k, &info, x_next, backtracks);
        last_recorded = options.record_all || checkpoints.should_record(k);
        if last_recorded {
            trace.push(rec);
        }
        last = Some(rec);

        if options.use_tolerance
            && info.sigma <= options.sigma_tol
            && info.step_norm / info.alpha <= options.r_tol * (1.0 + linalg::norm(x_next))
        {
            break Termination::Tolerance;
        }
    };
    if !last_recorded {
        if let Some(rec) = last {
            trace.push(rec);
        }
    }

    let x = solver.iterate().to_vec();
    RunReport {
        solver: solver.name().to_string(),
        iterations: k,
        termination,
        error,
        counters: problem.counters(),
        backtracks_total: backtracks,
        final_norm: linalg::norm(&x),
        final_head: x.iter().take(8).copied().collect(),
        final_x: x,
        trace,
    }
}
