//! Explicit comparison methods and a fixed-step reference.
//!
//! - [`Sedm`]: projected gradient on the penalized smooth cost with an
//!   Armijo linesearch restarted from a fixed `α_max` at every iteration.
//! - [`Bigsam`]: convex combination of an upper gradient step and a lower
//!   prox-gradient step.
//! - [`I3d`]: gradient steps on `σ_k f1 + f2` for quadratic upper costs.
//! - [`PgmRef`] / [`reference_pgm`]: plain proximal gradient with constant
//!   `σ` and `α`.

use serde::Serialize;

use crate::linalg;
use crate::problem::{combine, BilevelProblem, CompositeProx};
use crate::problems::residual::{gradient_mapping_norm, lower_residual, ProxGradStep};
use crate::schedule::PenaltySchedule;
use crate::solver::{check_positive, check_unit_interval, BilevelSolver, SolverError, StepInfo};

fn inapplicable(method: &'static str, reason: &str) -> SolverError {
    SolverError::Inapplicable {
        method,
        reason: reason.to_string(),
    }
}

/// The baselines treat the upper level as smooth; the prox slot must be empty.
fn require_g1_zero(method: &'static str, problem: &BilevelProblem) -> Result<(), SolverError> {
    if !problem.g1.is_zero() {
        return Err(inapplicable(method, "the upper level has a nonsmooth term g1"));
    }
    Ok(())
}

fn lower_prox(problem: &BilevelProblem, t: f64, u: &[f64]) -> Result<Vec<f64>, SolverError> {
    // σ = 0 selects the prox of g2 under every strategy
    Ok(problem.prox(t, 0.0, u)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SedmParams {
    pub alpha_max: f64,
    pub eta: f64,
    pub nu: f64,
    pub max_backtracks: u32,
}

impl SedmParams {
    /// `α_max = factor / L_f2`.
    pub fn with_factor(problem: &BilevelProblem, factor: f64) -> Self {
        Self {
            alpha_max: factor / problem.moduli.l_f2,
            eta: 0.5,
            nu: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sedm {
    params: SedmParams,
    schedule: PenaltySchedule,
    x: Vec<f64>,
    alpha: f64,
    grad_f1: Vec<f64>,
    grad_f2: Vec<f64>,
    /// `(f1(x), f2(x))` at the current iterate.
    values: (f64, f64),
}

impl Sedm {
    pub fn init(
        problem: &BilevelProblem,
        x0: &[f64],
        params: SedmParams,
        schedule: PenaltySchedule,
    ) -> Result<Self, SolverError> {
        require_g1_zero("sedm", problem)?;
        if !(problem.g2.is_zero() || problem.g2.is_indicator()) {
            return Err(inapplicable("sedm", "g2 must be an indicator with a projection oracle"));
        }
        if !(problem.f1.has_value() && problem.f2.has_value()) {
            return Err(SolverError::MissingValue("sedm"));
        }
        check_positive("sedm.alpha_max", params.alpha_max)?;
        check_unit_interval("sedm.eta", params.eta)?;
        check_unit_interval("sedm.nu", params.nu)?;
        let g = problem.eval_penalized_grad(schedule.current(), x0)?;
        let values = problem.eval_smooth_values(x0).ok_or(SolverError::MissingValue("sedm"))?;
        Ok(Self {
            alpha: params.alpha_max,
            params,
            schedule,
            x: x0.to_vec(),
            grad_f1: g.grad_f1,
            grad_f2: g.grad_f2,
            values,
        })
    }

    pub fn sedm_step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        let sigma = self.schedule.next_sigma();
        let grad = combine(sigma, &self.grad_f1, &self.grad_f2);
        let f_cur = sigma * self.values.0 + self.values.1;
        let mut alpha = self.params.alpha_max;
        let mut tries = 0u32;
        let (x_next, values) = loop {
            tries += 1;
            let u: Vec<f64> = self.x.iter().zip(&grad).map(|(x, g)| x - alpha * g).collect();
            let cand = problem.prox(alpha, sigma, &u)?;
            let v = problem.eval_smooth_values(&cand).ok_or(SolverError::MissingValue("sedm"))?;
            let d = linalg::sub(&cand, &self.x);
            if sigma * v.0 + v.1 <= f_cur + self.params.nu * linalg::dot(&grad, &d) {
                break (cand, v);
            }
            if tries >= self.params.max_backtracks {
                return Err(SolverError::BacktrackLimit {
                    limit: self.params.max_backtracks,
                });
            }
            alpha *= self.params.eta;
        };
        let g = problem.eval_penalized_grad(sigma, &x_next)?;
        let step_norm = linalg::dist(&self.x, &x_next);
        let lower_resid = gradient_mapping_norm(problem, &x_next, &g.grad_f2, self.params.alpha_max);
        self.x = x_next;
        self.alpha = alpha;
        self.grad_f1 = g.grad_f1;
        self.grad_f2 = g.grad_f2;
        self.values = values;
        Ok(StepInfo {
            alpha,
            sigma,
            backtracks: u64::from(tries - 1),
            step_norm,
            lower_resid,
            ..StepInfo::default()
        })
    }
}

impl BilevelSolver for Sedm {
    fn name(&self) -> &'static str {
        "sedm"
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
        self.sedm_step(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigsamParams {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl BigsamParams {
    /// `α(1) = 2/(L_f1 + μ_f1)`, `α(2) = 1/L_f2`.
    pub fn from_problem(problem: &BilevelProblem) -> Self {
        let m = problem.moduli;
        Self {
            alpha1: 2.0 / (m.l_f1 + m.mu_f1),
            alpha2: 1.0 / m.l_f2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bigsam {
    params: BigsamParams,
    schedule: PenaltySchedule,
    x: Vec<f64>,
    grad_f2: Vec<f64>,
}

impl Bigsam {
    pub fn init(
        problem: &BilevelProblem,
        x0: &[f64],
        params: BigsamParams,
        schedule: PenaltySchedule,
    ) -> Result<Self, SolverError> {
        require_g1_zero("bigsam", problem)?;
        if !(problem.moduli.mu_f1 > 0.0 && !problem.f1.is_zero()) {
            return Err(inapplicable("bigsam", "the upper level must be smooth and strongly convex"));
        }
        if schedule.current() > 1.0 {
            return Err(SolverError::InvalidParameter(format!(
                "bigsam needs sigma0 <= 1, got {}",
                schedule.current()
            )));
        }
        check_positive("bigsam.alpha1", params.alpha1)?;
        check_positive("bigsam.alpha2", params.alpha2)?;
        let grad_f2 = problem.grad_f2(x0)?;
        Ok(Self {
            params,
            schedule,
            x: x0.to_vec(),
            grad_f2,
        })
    }

    pub fn bigsam_step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        let sigma = self.schedule.next_sigma();
        let BigsamParams { alpha1, alpha2 } = self.params;
        let g1 = problem.grad_f1(&self.x)?;
        let hat1: Vec<f64> = self.x.iter().zip(&g1).map(|(x, g)| x - alpha1 * g).collect();
        let u: Vec<f64> = self.x.iter().zip(&self.grad_f2).map(|(x, g)| x - alpha2 * g).collect();
        let hat2 = lower_prox(problem, alpha2, &u)?;
        let x_next: Vec<f64> = hat1
            .iter()
            .zip(&hat2)
            .map(|(a, b)| sigma * a + (1.0 - sigma) * b)
            .collect();
        let grad_f2 = problem.grad_f2(&x_next)?;
        let lower_resid = gradient_mapping_norm(problem, &x_next, &grad_f2, alpha2);
        let step_norm = linalg::dist(&self.x, &x_next);
        self.x = x_next;
        self.grad_f2 = grad_f2;
        Ok(StepInfo {
            alpha: alpha2,
            sigma,
            step_norm,
            lower_resid,
            ..StepInfo::default()
        })
    }
}

impl BilevelSolver for Bigsam {
    fn name(&self) -> &'static str {
        "bigsam"
    }
    fn iterate(&self) -> &[f64] {
        &self.x
    }
    fn sigma(&self) -> f64 {
        self.schedule.current()
    }
    fn alpha(&self) -> f64 {
        self.params.alpha2
    }
    fn step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        self.bigsam_step(problem)
    }
}

#[derive(Debug, Clone)]
pub struct I3d {
    gamma: f64,
    /// `c` in `f1 = (c/2)‖·‖²`.
    scale: f64,
    schedule: PenaltySchedule,
    x: Vec<f64>,
    grad_f2: Vec<f64>,
}

impl I3d {
    /// `γ = 1/(L_f2 + σ0·c)`.
    pub fn default_gamma(problem: &BilevelProblem, sigma0: f64) -> f64 {
        let c = problem.f1.quadratic_scale().unwrap_or(1.0);
        1.0 / (problem.moduli.l_f2 + sigma0 * c)
    }

    pub fn init(
        problem: &BilevelProblem,
        x0: &[f64],
        gamma: f64,
        schedule: PenaltySchedule,
    ) -> Result<Self, SolverError> {
        require_g1_zero("i3d", problem)?;
        if !problem.g2.is_zero() {
            return Err(inapplicable("i3d", "the lower level must be smooth (g2 = 0)"));
        }
        let Some(scale) = problem.f1.quadratic_scale() else {
            return Err(inapplicable("i3d", "the upper level must be (c/2)‖·‖²"));
        };
        check_positive("i3d.gamma", gamma)?;
        let grad_f2 = problem.grad_f2(x0)?;
        Ok(Self {
            gamma,
            scale,
            schedule,
            x: x0.to_vec(),
            grad_f2,
        })
    }

    pub fn i3d_step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        let sigma = self.schedule.current();
        self.schedule.next_sigma();
        let (gamma, c) = (self.gamma, self.scale);
        let x_next: Vec<f64> = self
            .x
            .iter()
            .zip(&self.grad_f2)
            .map(|(x, g)| x - gamma * (g + sigma * c * x))
            .collect();
        let grad_f2 = problem.grad_f2(&x_next)?;
        let step_norm = linalg::dist(&self.x, &x_next);
        let lower_resid = linalg::norm(&grad_f2);
        self.x = x_next;
        self.grad_f2 = grad_f2;
        Ok(StepInfo {
            alpha: gamma,
            sigma,
            step_norm,
            lower_resid,
            ..StepInfo::default()
        })
    }
}

impl BilevelSolver for I3d {
    fn name(&self) -> &'static str {
        "i3d"
    }
    fn iterate(&self) -> &[f64] {
        &self.x
    }
    fn sigma(&self) -> f64 {
        self.schedule.current()
    }
    fn alpha(&self) -> f64 {
        self.gamma
    }
    fn step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        self.i3d_step(problem)
    }
}

/// Fixed-step proximal gradient on `σφ1 + φ2` with constant `σ` and `α`.
#[derive(Debug, Clone)]
pub struct PgmRef {
    sigma: f64,
    alpha: f64,
    x: Vec<f64>,
    grad_fk: Vec<f64>,
}

impl PgmRef {
    pub fn init(problem: &BilevelProblem, x0: &[f64], sigma: f64, alpha: f64) -> Result<Self, SolverError> {
        check_positive("pgm.alpha", alpha)?;
        check_positive("pgm.sigma", sigma)?;
        let g = problem.eval_penalized_grad(sigma, x0)?;
        Ok(Self {
            sigma,
            alpha,
            x: x0.to_vec(),
            grad_fk: g.grad_fk,
        })
    }
}

impl BilevelSolver for PgmRef {
    fn name(&self) -> &'static str {
        "pgm-ref"
    }
    fn iterate(&self) -> &[f64] {
        &self.x
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn step(&mut self, problem: &BilevelProblem) -> Result<StepInfo, SolverError> {
        let (sigma, alpha) = (self.sigma, self.alpha);
        let u: Vec<f64> = self.x.iter().zip(&self.grad_fk).map(|(x, g)| x - alpha * g).collect();
        let x_next = problem.prox(alpha, sigma, &u)?;
        let g = problem.eval_penalized_grad(sigma, &x_next)?;
        let lower_resid = lower_residual(
            problem,
            &ProxGradStep {
                x: &self.x,
                x_next: &x_next,
                alpha,
                sigma,
                grad_fk: &self.grad_fk,
                grad_f2_next: &g.grad_f2,
            },
        );
        let step_norm = linalg::dist(&self.x, &x_next);
        self.x = x_next;
        self.grad_fk = g.grad_fk;
        Ok(StepInfo {
            alpha,
            sigma,
            step_norm,
            lower_resid,
            ..StepInfo::default()
        })
    }
}

/// `x^{k+1} = prox_{α gσ}(x^k − α∇fσ(x^k))` with constant `σ` and `α`;
/// returns `x^0, …, x^iters`. Written out independently of [`PgmRef`].
pub fn reference_pgm(
    problem: &BilevelProblem,
    x0: &[f64],
    sigma: f64,
    alpha: f64,
    iters: usize,
) -> Result<Vec<Vec<f64>>, SolverError> {
    check_positive("alpha", alpha)?;
    let mut traj = Vec::with_capacity(iters + 1);
    traj.push(x0.to_vec());
    let mut x = x0.to_vec();
    for _ in 0..iters {
        let g = problem.eval_penalized_grad(sigma, &x)?;
        let u: Vec<f64> = x.iter().zip(&g.grad_fk).map(|(x, g)| x - alpha * g).collect();
        x = problem.prox(alpha, sigma, &u)?;
        traj.push(x.clone());
    }
    Ok(traj)
}

/// Whether a composite strategy keeps the upper level out of the prox slot.
pub fn smooth_upper(problem: &BilevelProblem) -> bool {
    problem.g1.is_zero() && matches!(problem.composite, CompositeProx::G1Zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, LinearOperator};
    use crate::problem::GlobalModuli;
    use crate::smooth::LeastSquares;
    use crate::{prox, smooth};
    use std::sync::Arc;

    fn smooth_upper_problem(a: DenseMatrix, b: Vec<f64>, g2_nonneg: bool) -> BilevelProblem {
        let n = a.cols();
        let g2: Arc<dyn crate::problem::ProxOracle> = if g2_nonneg {
            Arc::new(prox::NonnegIndicator { dim: n })
        } else {
            Arc::new(prox::Zero { dim: n })
        };
        BilevelProblem::new(
            Arc::new(smooth::ScaledSqNorm::half(n)),
            Arc::new(prox::Zero { dim: n }),
            Arc::new(LeastSquares::new(Arc::new(a), b)),
            g2,
            CompositeProx::G1Zero,
        )
        .unwrap()
    }

    #[test]
    fn i3d_one_step_hand_example() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 2.0]);
        let p = smooth_upper_problem(a, vec![1.0, 2.0], false);
        let mut s = I3d::init(&p, &[0.0, 0.0], 0.2, PenaltySchedule::constant(0.1)).unwrap();
        let info = s.i3d_step(&p).unwrap();
        assert_eq!(info.sigma, 0.1);
        assert!((s.x[0] - 0.2).abs() < 1e-15 && (s.x[1] - 0.8).abs() < 1e-15);
        // init and one step
        assert_eq!(p.counters().grad_f2, 2);
    }

    #[test]
    fn i3d_exact_quadratic_step() {
        let p = smooth_upper_problem(DenseMatrix::identity(1), vec![0.0], false);
        // σ = 0 is not a legal schedule start, use a tiny constant and γ = 1
        let mut s = I3d::init(&p, &[1.0], 1.0, PenaltySchedule::constant(1e-300)).unwrap();
        s.i3d_step(&p).unwrap();
        assert!(s.x[0].abs() < 1e-299);
    }

    #[test]
    fn bigsam_hand_example() {
        let p = smooth_upper_problem(DenseMatrix::identity(2), vec![2.0, 2.0], false);
        let params = BigsamParams {
            alpha1: 1.0,
            alpha2: 1.0,
        };
        let mut s = Bigsam::init(&p, &[0.0, 0.0], params, PenaltySchedule::constant(0.5));
        // μ_f1 unset: the method refuses
        assert!(matches!(s, Err(SolverError::Inapplicable { .. })));
        let p = p.with_moduli(GlobalModuli {
            l_f1: 1.0,
            mu_f1: 1.0,
            l_f2: 1.0,
        });
        s = Bigsam::init(&p, &[0.0, 0.0], params, PenaltySchedule::constant(0.5));
        let mut s = s.unwrap();
        s.bigsam_step(&p).unwrap();
        assert_eq!(s.x, vec![1.0, 1.0]);
    }

    #[test]
    fn bigsam_endpoints_of_the_combination() {
        let p = smooth_upper_problem(DenseMatrix::identity(2), vec![2.0, -4.0], true).with_moduli(GlobalModuli {
            l_f1: 1.0,
            mu_f1: 1.0,
            l_f2: 1.0,
        });
        let params = BigsamParams {
            alpha1: 0.3,
            alpha2: 0.7,
        };
        let x0 = [1.0, 1.0];
        let mut upper = Bigsam::init(&p, &x0, params, PenaltySchedule::constant(1.0)).unwrap();
        upper.bigsam_step(&p).unwrap();
        assert_eq!(upper.x, vec![0.7, 0.7]);
        // σ tiny: essentially the projected lower step [1 − 0.7·(−1), max(0, 1 − 0.7·5)]
        let mut lower = Bigsam::init(&p, &x0, params, PenaltySchedule::constant(1e-300)).unwrap();
        lower.bigsam_step(&p).unwrap();
        assert_eq!(lower.x[0], 1.7);
        assert!(lower.x[1] >= 0.0 && lower.x[1] < 1e-299);
    }

    #[test]
    fn sedm_full_step_on_quadratic() {
        // f2 = ½‖x‖² with a negligible upper term; α_max = ½/L
        let p = smooth_upper_problem(DenseMatrix::identity(3), vec![0.0; 3], false).with_moduli(GlobalModuli {
            l_f1: 1.0,
            mu_f1: 1.0,
            l_f2: 1.0,
        });
        let params = SedmParams::with_factor(&p, 0.5);
        let mut s = Sedm::init(&p, &[1.0, -2.0, 3.0], params, PenaltySchedule::constant(1e-300)).unwrap();
        for _ in 0..5 {
            let before = s.x.clone();
            let info = s.sedm_step(&p).unwrap();
            assert_eq!(info.backtracks, 0);
            for (b, a) in before.iter().zip(&s.x) {
                assert!((a - 0.5 * b).abs() <= 1e-15 * b.abs());
            }
        }
    }

    #[test]
    fn sedm_projects_onto_the_orthant() {
        let a = DenseMatrix::identity(1);
        let p = smooth_upper_problem(a, vec![-3.0], true).with_moduli(GlobalModuli {
            l_f1: 1.0,
            mu_f1: 1.0,
            l_f2: 1.0,
        });
        let mut s = Sedm::init(&p, &[1.0], SedmParams::with_factor(&p, 1.0), PenaltySchedule::constant(1e-3)).unwrap();
        s.sedm_step(&p).unwrap();
        assert_eq!(s.x, vec![0.0]);
        assert_eq!(p.counters().f_value, 2);
    }

    #[test]
    fn sedm_refuses_nonsmooth_upper() {
        let n = 2;
        let p = BilevelProblem::new(
            Arc::new(smooth::Zero { dim: n }),
            Arc::new(prox::L1Norm::new(n)),
            Arc::new(smooth::ScaledSqNorm::half(n)),
            Arc::new(prox::Zero { dim: n }),
            CompositeProx::G2Zero,
        )
        .unwrap();
        let e = Sedm::init(&p, &[0.0, 0.0], SedmParams::with_factor(&p, 1.0), PenaltySchedule::harmonic(1.0));
        assert!(matches!(e, Err(SolverError::Inapplicable { method: "sedm", .. })));
        assert!(!smooth_upper(&p));
    }

    #[test]
    fn reference_pgm_matches_linear_contraction() {
        // ∇fσ(x) = (σ + 1)x with f1 = ½‖·‖², f2 = ½‖x‖²
        let p = smooth_upper_problem(DenseMatrix::identity(2), vec![0.0, 0.0], false);
        let traj = reference_pgm(&p, &[1.0, -1.0], 0.5, 0.4, 10).unwrap();
        let q: f64 = 1.0 - 0.4 * 1.5;
        for (k, x) in traj.iter().enumerate() {
            let expect = q.powi(k as i32);
            assert!((x[0] - expect).abs() <= 1e-15);
            assert!((x[1] + expect).abs() <= 1e-15);
        }
    }
}
