//! Adaptive bilevel proximal gradient method.
//!
//! Each iteration picks the next inverse penalty from the schedule, proposes
//! a stepsize from local Lipschitz and cocoercivity estimates of the
//! previous step, and backtracks geometrically until the estimate at the
//! new point satisfies `α·ℓ ≤ ν`. The linesearch only needs gradients; each
//! candidate costs one `∇f2`, one `∇f1` and one prox. The gradients of the
//! accepted candidate are cached and reused by the next iteration.

use serde::Serialize;

use crate::linalg;
use crate::problem::{combine, BilevelProblem, PenalizedGrad};
use crate::problems::residual::{lower_residual, ProxGradStep};
use crate::schedule::PenaltySchedule;
use crate::solver::{check_positive, check_unit_interval, BilevelSolver, SolverError, StepInfo};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaBimParams {
    pub nu: f64,
    pub eta: f64,
    /// `α0`; `None` probes the curvature at the start point.
    pub alpha0: Option<f64>,
    /// `α−1`; defaults to `α0`.
    pub alpha_m1: Option<f64>,
    /// `α_max = alpha_max_factor / ℓ0`.
    pub alpha_max_factor: f64,
    pub max_backtracks: u32,
    /// Disabling the linesearch accepts every initial proposal (test mode).
    pub linesearch: bool,
    /// Report coincident iterates as [`SolverError::DegenerateStep`]
    /// instead of zeroing the moduli.
    pub strict_moduli: bool,
}

impl Default for AdaBimParams {
    fn default() -> Self {
        Self {
            nu: 0.98,
            eta: 0.5,
            alpha0: None,
            alpha_m1: None,
            alpha_max_factor: 1e6,
            max_backtracks: 60,
            linesearch: true,
            strict_moduli: false,
        }
    }
}

/// Fallback `α_max` when the initial modulus estimate is zero.
pub const ALPHA_MAX_FALLBACK: f64 = 1e12;

/// Local estimates between two consecutive iterates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LocalModuli {
    /// `ℓ = σℓ(1) + ℓ(2)`
    pub l: f64,
    /// `c = ‖Δ∇fσ‖²/⟨Δ∇fσ, Δx⟩`
    pub c: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Rayleigh-type estimates between `x_prev` and `x_cur` for `fσ = σf1 + f2`.
///
/// Coincident iterates (`‖Δx‖ ≤ 1e-14·(1 + ‖x_cur‖)`) yield all-zero
/// moduli. When `⟨Δ∇fσ, Δx⟩ ≤ 1e-16·‖Δ∇fσ‖‖Δx‖` the gradient is locally
/// flat to working precision and the moduli are likewise zero.
pub fn local_moduli(
    x_prev: &[f64],
    x_cur: &[f64],
    grads_prev: (&[f64], &[f64]),
    grads_cur: (&[f64], &[f64]),
    sigma: f64,
) -> LocalModuli {
    try_local_moduli(x_prev, x_cur, grads_prev, grads_cur, sigma).unwrap_or_default()
}

/// Like [`local_moduli`] but reports coincident iterates as an error.
pub fn local_moduli_strict(
    x_prev: &[f64],
    x_cur: &[f64],
    grads_prev: (&[f64], &[f64]),
    grads_cur: (&[f64], &[f64]),
    sigma: f64,
) -> Result<LocalModuli, SolverError> {
    try_local_moduli(x_prev, x_cur, grads_prev, grads_cur, sigma).ok_or(SolverError::DegenerateStep)
}

fn try_local_moduli(
    x_prev: &[f64],
    x_cur: &[f64],
    (g1p, g2p): (&[f64], &[f64]),
    (g1c, g2c): (&[f64], &[f64]),
    sigma: f64,
) -> Option<LocalModuli> {
    let dx = linalg::sub(x_prev, x_cur);
    let dx_sq = linalg::norm_sq(&dx);
    let eps_step = 1e-14 * (1.0 + linalg::norm(x_cur));
    if dx_sq.sqrt() <= eps_step {
        return None;
    }
    let dg1 = linalg::sub(g1p, g1c);
    let dg2 = linalg::sub(g2p, g2c);
    let dgk = combine(sigma, &dg1, &dg2);
    let inner1 = linalg::dot(&dg1, &dx);
    let inner2 = linalg::dot(&dg2, &dx);
    let inner = linalg::dot(&dgk, &dx);
    let dgk_sq = linalg::norm_sq(&dgk);

    if inner <= 1e-16 * dgk_sq.sqrt() * dx_sq.sqrt() {
        return Some(LocalModuli::default());
    }
    let l1 = (inner1 / dx_sq).max(0.0);
    let l2 = (inner2 / dx_sq).max(0.0);
    let l = sigma * l1 + l2;
    Some(LocalModuli {
        l,
        c: dgk_sq / inner,
        l1,
        l2,
    })
}

/// The three candidates of the stepsize proposal and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepsizeInit {
    pub value: f64,
    pub growth_branch: f64,
    pub curvature_branch: f64,
    pub cap: f64,
    /// `1 − 4(1 − σ_k/σ_{k−1})·α_k·ℓ(2)_k`
    pub radicand: f64,
    /// `ρ_k = σ_kα_k/(σ_{k−1}α_{k−1})`
    pub rho: f64,
}

/// Proposal `ᾱ_{k+1}` from the previous two stepsizes and penalties and the
/// moduli estimated between `x^{k−1}` and `x^k`.
#[allow(clippy::too_many_arguments)]
pub fn stepsize_init(
    sigma_prev: f64,
    sigma_cur: f64,
    sigma_next: f64,
    alpha_prev: f64,
    alpha_cur: f64,
    moduli: LocalModuli,
    alpha_max: f64,
) -> Result<StepsizeInit, SolverError> {
    let rho = sigma_cur * alpha_cur / (sigma_prev * alpha_prev);
    let ratio = sigma_cur / sigma_prev;
    let shrink = sigma_cur / sigma_next;

    let growth_branch = (ratio * (1.0 + rho)).sqrt() * shrink * alpha_cur;

    let radicand = 1.0 - 4.0 * (1.0 - ratio) * alpha_cur * moduli.l2;
    if radicand < 0.0 {
        return Err(SolverError::RadicandViolation { value: radicand });
    }
    let excess = (alpha_cur * moduli.c - 1.0).max(0.0);
    let denom = alpha_cur * moduli.l * excess;
    let curvature_branch = if denom > 0.0 {
        radicand.sqrt() / (2.0 * denom.sqrt()) * shrink * alpha_cur
    } else {
        f64::INFINITY
    };

    Ok(StepsizeInit {
        value: growth_branch.min(curvature_branch).min(alpha_max),
        growth_branch,
        curvature_branch,
        cap: alpha_max,
        radicand,
        rho,
    })
}

/// Full per-iteration memory of the method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaBimState {
    pub k: u64,
    pub x_prev: Vec<f64>,
    pub x_cur: Vec<f64>,
    pub alpha_prev: f64,
    pub alpha_cur: f64,
    pub sigma_prev: f64,
    pub sigma_cur: f64,
    pub grad_f1_cur: Vec<f64>,
    pub grad_f2_cur: Vec<f64>,
    /// Moduli between `x_prev` and `x_cur` at `sigma_cur`.
    pub moduli_cur: LocalModuli,
    pub alpha_max: f64,
    pub nu: f64,
    pub eta: f64,
    pub grad_f2_evals: u64,
    pub prox_evals: u64,
    pub backtracks_total: u64,
}

#[derive(Debug, Clone)]
pub struct AdaBim {
    pub state: AdaBimState,
    pub params: AdaBimParams,
    schedule: PenaltySchedule,
}

/// Curvature probe `⟨∇f(x+δe) − ∇f(x), δe⟩/δ²` along `e = 1/√n`.
fn probe_curvature(
    problem: &BilevelProblem,
    x: &[f64],
    sigma: f64,
    at_x: &PenalizedGrad,
) -> Result<f64, SolverError> {
    let n = x.len();
    let delta = 1e-4 * (1.0 + linalg::norm(x));
    let step = delta / (n as f64).sqrt();
    let xp: Vec<f64> = x.iter().map(|v| v + step).collect();
    let gp = problem.eval_penalized_grad(sigma, &xp)?;
    let dx = linalg::sub(&xp, x);
    let dg = linalg::sub(&gp.grad_fk, &at_x.grad_fk);
    Ok(linalg::dot(&dg, &dx) / linalg::norm_sq(&dx))
}

impl AdaBim {
    /// One prox-gradient step from `x_start` (`x^{−1}`) with `σ_{−1} = σ_0`,
    /// caching gradients at both `x^{−1}` and `x^0`.
    pub fn init(
        problem: &BilevelProblem,
        x_start: &[f64],
        params: AdaBimParams,
        schedule: PenaltySchedule,
    ) -> Result<Self, SolverError> {
        check_unit_interval("adabim.nu", params.nu)?;
        check_unit_interval("adabim.eta", params.eta)?;
        check_positive("adabim.alpha_max_factor", params.alpha_max_factor)?;
        if x_start.len() != problem.dim() {
            return Err(SolverError::InvalidParameter(format!(
                "start point has length {}, problem dimension is {}",
                x_start.len(),
                problem.dim()
            )));
        }
        let sigma0 = schedule.current();
        let before = problem.counters();

        let g_m1 = problem.eval_penalized_grad(sigma0, x_start)?;
        let alpha0 = match params.alpha0 {
            Some(a) => a,
            None => {
                let l_hat = probe_curvature(problem, x_start, sigma0, &g_m1)?;
                if l_hat > 0.0 && l_hat.is_finite() {
                    1.0 / l_hat
                } else {
                    1.0
                }
            }
        };
        let alpha_m1 = params.alpha_m1.unwrap_or(alpha0);
        check_positive("adabim.alpha0", alpha0)?;
        check_positive("adabim.alpha_m1", alpha_m1)?;
        if alpha0 < alpha_m1 {
            return Err(SolverError::InvalidParameter(format!(
                "alpha0 = {alpha0} must be at least alpha_m1 = {alpha_m1}"
            )));
        }

        let u: Vec<f64> = x_start
            .iter()
            .zip(&g_m1.grad_fk)
            .map(|(x, g)| x - alpha0 * g)
            .collect();
        let x0 = problem.prox(alpha0, sigma0, &u)?;
        let g0 = problem.eval_penalized_grad(sigma0, &x0)?;

        let moduli = if params.strict_moduli {
            local_moduli_strict(
                x_start,
                &x0,
                (&g_m1.grad_f1, &g_m1.grad_f2),
                (&g0.grad_f1, &g0.grad_f2),
                sigma0,
            )?
        } else {
            local_moduli(
                x_start,
                &x0,
                (&g_m1.grad_f1, &g_m1.grad_f2),
                (&g0.grad_f1, &g0.grad_f2),
                sigma0,
            )
        };
        let alpha_max = if moduli.l > 0.0 {
            params.alpha_max_factor / moduli.l
        } else {
            ALPHA_MAX_FALLBACK
        };

        let after = problem.counters();
        let state = AdaBimState {
            k: 0,
            x_prev: x_start.to_vec(),
            x_cur: x0,
            alpha_prev: alpha_m1,
            alpha_cur: alpha0,
            sigma_prev: sigma0,
            sigma_cur: sigma0,
            grad_f1_cur: g0.grad_f1,
            grad_f2_cur: g0.grad_f2,
            moduli_cur: moduli,
            alpha_max,
            nu: params.nu,
            eta: params.eta,
            grad_f2_evals: after.grad_f2 - before.grad_f2,
            prox_evals: after.prox - before.prox,
            backtracks_total: 0,
        };
        Ok(Self {
            state,
            params,
            schedule,
        })
    }

    pub fn schedule(&self) -> &PenaltySchedule {
        &self.schedule
    }

    /// One outer iteration: penalty update, stepsize proposal, linesearch.
    pub fn adabim_step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        let st = &self.state;
        let sigma_next = self.schedule.next_sigma();
        let init = stepsize_init(
            st.sigma_prev,
            st.sigma_cur,
            sigma_next,
            st.alpha_prev,
            st.alpha_cur,
            st.moduli_cur,
            st.alpha_max,
        )?;

        let grad_fk = combine(sigma_next, &st.grad_f1_cur, &st.grad_f2_cur);
        let mut alpha = init.value;
        let mut tries: u32 = 0;
        let (x_next, grads, moduli) = loop {
            tries += 1;
            let u: Vec<f64> = st
                .x_cur
                .iter()
                .zip(&grad_fk)
                .map(|(x, g)| x - alpha * g)
                .collect();
            let cand = problem.prox(alpha, sigma_next, &u)?;
            let g = problem.eval_penalized_grad(sigma_next, &cand)?;
            let pair_cur = (st.grad_f1_cur.as_slice(), st.grad_f2_cur.as_slice());
            let pair_new = (g.grad_f1.as_slice(), g.grad_f2.as_slice());
            let m = if self.params.strict_moduli {
                local_moduli_strict(&st.x_cur, &cand, pair_cur, pair_new, sigma_next)?
            } else {
                local_moduli(&st.x_cur, &cand, pair_cur, pair_new, sigma_next)
            };
            if !self.params.linesearch || alpha * m.l <= st.nu {
                break (cand, g, m);
            }
            if tries >= self.params.max_backtracks {
                return Err(SolverError::BacktrackLimit {
                    limit: self.params.max_backtracks,
                });
            }
            alpha *= st.eta;
        };
        let backtracks = u64::from(tries - 1);

        let step_norm = linalg::dist(&x_next, &st.x_cur);
        let lower_resid = lower_residual(
            problem,
            &ProxGradStep {
                x: &st.x_cur,
                x_next: &x_next,
                alpha,
                sigma: sigma_next,
                grad_fk: &grad_fk,
                grad_f2_next: &grads.grad_f2,
            },
        );
        let rho_next = sigma_next * alpha / (st.sigma_cur * st.alpha_cur);

        let st = &mut self.state;
        st.k += 1;
        st.x_prev = std::mem::replace(&mut st.x_cur, x_next);
        st.alpha_prev = st.alpha_cur;
        st.alpha_cur = alpha;
        st.sigma_prev = st.sigma_cur;
        st.sigma_cur = sigma_next;
        st.grad_f1_cur = grads.grad_f1;
        st.grad_f2_cur = grads.grad_f2;
        st.moduli_cur = moduli;
        st.grad_f2_evals += u64::from(tries);
        st.prox_evals += u64::from(tries);
        st.backtracks_total += backtracks;

        Ok(StepInfo {
            alpha,
            sigma: sigma_next,
            backtracks,
            step_norm,
            lower_resid,
            lipschitz_estimate: Some(moduli.l),
            rho: Some(rho_next),
            radicand: Some(init.radicand),
        })
    }
}

impl BilevelSolver for AdaBim {
    fn name(&self) -> &'static str {
        "adabim"
    }
    fn iterate(&self) -> &[f64] {
        &self.state.x_cur
    }
    fn sigma(&self) -> f64 {
        self.state.sigma_cur
    }
    fn alpha(&self) -> f64 {
        self.state.alpha_cur
    }
    fn step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        self.adabim_step(problem)
    }
}

/// Runs the method to a budget or tolerance with default trace settings.
pub fn solve(
    problem: &BilevelProblem,
    x_start: &[f64],
    params: AdaBimParams,
    schedule: PenaltySchedule,
    options: &crate::driver::RunOptions,
) -> Result<crate::trace::RunReport, SolverError> {
    let mut solver = AdaBim::init(problem, x_start, params, schedule)?;
    Ok(crate::driver::run(problem, &mut solver, options))
}
