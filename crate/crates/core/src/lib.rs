//! Proximal gradient methods for simple convex bilevel programs
//!
//! ```text
//! minimize φ1(x) = f1(x) + g1(x)   over   x ∈ argmin φ2 = f2 + g2
//! ```
//!
//! where `f1`, `f2` are smooth and `g1`, `g2` have cheap proximal maps. The
//! methods follow the penalized family `σ_k φ1 + φ2` with an inverse penalty
//! `σ_k ↘ 0`:
//!
//! - [`adabim::AdaBim`] picks stepsizes from local curvature estimates and a
//!   gradient-only linesearch; no Lipschitz constants are needed.
//! - [`stabim::StaBim`] uses `ν/(σ L_f1 + L_f2)` given global moduli.
//! - [`baselines`] holds the explicit comparison methods.
//!
//! Every gradient, prox and value call goes through a [`BilevelProblem`],
//! which counts them. Dense kernels run on rayon above a size threshold when
//! the `parallel` feature (on by default) is enabled; results are identical
//! either way.
//!
//! ```
//! use bilevel_prox::prelude::*;
//!
//! let problem = problems::min_norm_line(Formulation::ProxUpper);
//! let report = adabim::solve(
//!     &problem,
//!     &[0.0, 0.0],
//!     AdaBimParams::default(),
//!     PenaltySchedule::harmonic(1.0),
//!     &RunOptions::grad_budget(20_000),
//! )
//! .unwrap();
//! let x = &report.final_x;
//! assert!((x[0] - 1.0).abs() < 1e-2 && (x[1] - 1.0).abs() < 1e-2);
//! ```

pub mod adabim;
pub mod baselines;
pub mod driver;
pub mod linalg;
pub mod problem;
pub mod problems;
pub mod prox;
pub mod schedule;
pub mod smooth;
pub mod solver;
pub mod stabim;
pub mod trace;

pub use problem::{BilevelProblem, CompositeProx, KnownOptima, ProblemError, ProxOracle, SmoothOracle};
pub use solver::{BilevelSolver, SolverError, StepInfo};

pub mod prelude {
    pub use crate::adabim::{self, AdaBim, AdaBimParams};
    pub use crate::baselines::{Bigsam, BigsamParams, I3d, PgmRef, Sedm, SedmParams};
    pub use crate::driver::{run, run_observed, RunOptions};
    pub use crate::problems::{self, Formulation, UpperCost};
    pub use crate::schedule::{PenaltySchedule, ScheduleKind};
    pub use crate::stabim::{StaBim, StaBimParams};
    pub use crate::trace::{RunReport, Termination};
    pub use crate::{BilevelProblem, BilevelSolver, SolverError};
}
