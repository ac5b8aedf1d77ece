//! Turning a [`Config`] into problem data, solver instances and run options.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use bilevel_prox::baselines::PgmRef;
use bilevel_prox::linalg::LinearOperator;
use bilevel_prox::prelude::*;
use bilevel_prox::problems::{
    BuildError, IntegralEquationInstance, IntegralKind, LinearInverseInstance, SparseDataset,
};

use crate::config::Config;
use crate::{CliError, Result};

/// Generated or loaded data, shared read-only by every run of a suite.
pub enum ProblemData {
    MinNormLine,
    MinL1Line,
    LinearInverse { inst: LinearInverseInstance, upper: UpperCost },
    Integral(IntegralEquationInstance),
    Logistic { a: Arc<dyn LinearOperator>, labels: Vec<f64>, upper: UpperCost },
}

pub fn config_seed(cfg: &Config) -> Result<u64> {
    match cfg.get::<u64>("problem.seed")? {
        Some(s) => Ok(s),
        None => cfg.get_or("seed", 0),
    }
}

fn parse_upper(cfg: &Config) -> Result<UpperCost> {
    match cfg.get_str("problem.upper").unwrap_or("sqnorm") {
        "sqnorm" | "l2" => Ok(UpperCost::SqNorm),
        "l1" => Ok(UpperCost::L1),
        other => Err(CliError::Config(format!("problem.upper = {other:?} (expected sqnorm or l1)"))),
    }
}

fn dims(cfg: &Config, key: &str, default: usize) -> Result<usize> {
    let v = cfg.get_or(key, default)?;
    if v == 0 {
        return Err(CliError::Config(format!("{key} must be positive")));
    }
    Ok(v)
}

impl ProblemData {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let kind = cfg
            .get_str("problem.kind")
            .ok_or_else(|| CliError::Config("problem.kind is required".into()))?;
        let seed = config_seed(cfg)?;
        let gen_err = |e: bilevel_prox::problems::GenError| CliError::Config(e.to_string());
        Ok(match kind {
            "min_norm_line" => ProblemData::MinNormLine,
            "min_l1_line" => ProblemData::MinL1Line,
            "linear_inverse" => {
                let inst = bilevel_prox::problems::gen_linear_inverse(
                    dims(cfg, "problem.m", 20)?,
                    dims(cfg, "problem.n", 50)?,
                    dims(cfg, "problem.nstar", 5)?,
                    seed,
                )
                .map_err(gen_err)?;
                ProblemData::LinearInverse {
                    inst,
                    upper: parse_upper(cfg)?,
                }
            }
            "phillips" | "foxgood" | "baart" => {
                let k = IntegralKind::from_str(kind).map_err(gen_err)?;
                let noise = cfg.get_or("problem.noise", 0.0)?;
                let inst = bilevel_prox::problems::gen_integral_equation(k, dims(cfg, "problem.n", 64)?, seed, noise)
                    .map_err(gen_err)?;
                ProblemData::Integral(inst)
            }
            "logistic" => {
                let inst = bilevel_prox::problems::gen_logistic(
                    dims(cfg, "problem.m", 200)?,
                    dims(cfg, "problem.n", 20)?,
                    seed,
                )
                .map_err(gen_err)?;
                ProblemData::Logistic {
                    a: Arc::new(inst.a),
                    labels: inst.labels,
                    upper: parse_upper(cfg)?,
                }
            }
            "libsvm" => {
                let ds = load_libsvm(cfg)?;
                ProblemData::Logistic {
                    a: ds.to_csr(),
                    labels: ds.labels,
                    upper: parse_upper(cfg)?,
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "problem.kind = {other:?} (expected min_norm_line, min_l1_line, linear_inverse, \
                     phillips, foxgood, baart, logistic or libsvm)"
                )))
            }
        })
    }

    pub fn build(&self, form: Formulation) -> std::result::Result<BilevelProblem, BuildError> {
        match self {
            ProblemData::MinNormLine => Ok(problems::min_norm_line(form)),
            ProblemData::MinL1Line => match form {
                Formulation::ProxUpper => Ok(problems::min_l1_line()),
                Formulation::SmoothUpper => Err(BuildError::NotSmooth(UpperCost::L1)),
            },
            ProblemData::LinearInverse { inst, upper } => problems::linear_inverse(inst, *upper, form),
            ProblemData::Integral(inst) => problems::integral_equation(inst, form),
            ProblemData::Logistic { a, labels, upper } => problems::logistic(Arc::clone(a), labels.clone(), *upper, form),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemData::MinNormLine | ProblemData::MinL1Line => 2,
            ProblemData::LinearInverse { inst, .. } => inst.a.cols(),
            ProblemData::Integral(inst) => inst.a.cols(),
            ProblemData::Logistic { a, .. } => a.cols(),
        }
    }
}

fn load_libsvm(cfg: &Config) -> Result<SparseDataset> {
    let path = PathBuf::from(
        cfg.get_str("data.path")
            .ok_or_else(|| CliError::Config("problem.kind = libsvm needs data.path".into()))?,
    );
    let add_bias = cfg.bool_or("data.add_bias", false)?;
    let file = File::open(&path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    bilevel_prox::problems::parse_libsvm(BufReader::new(file), add_bias)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverSpec {
    Adabim,
    Stabim,
    /// Armijo restarted from `factor / L_f2`.
    Sedm { factor: f64 },
    Bigsam,
    I3d,
    PgmRef,
}

impl FromStr for SolverSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "adabim" => SolverSpec::Adabim,
            "stabim" => SolverSpec::Stabim,
            "sedm" => SolverSpec::Sedm { factor: 1.0 },
            "bigsam" => SolverSpec::Bigsam,
            "i3d" => SolverSpec::I3d,
            "pgm-ref" => SolverSpec::PgmRef,
            _ => match s.strip_prefix("sedm-").map(str::parse::<f64>) {
                Some(Ok(factor)) if factor > 0.0 && factor.is_finite() => SolverSpec::Sedm { factor },
                _ => {
                    return Err(CliError::Config(format!(
                        "unknown solver {s:?} (expected adabim, stabim, sedm, sedm-<factor>, bigsam, i3d, pgm-ref)"
                    )))
                }
            },
        })
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Adabim => f.write_str("adabim"),
            SolverSpec::Stabim => f.write_str("stabim"),
            SolverSpec::Sedm { factor } => write!(f, "sedm-{factor}"),
            SolverSpec::Bigsam => f.write_str("bigsam"),
            SolverSpec::I3d => f.write_str("i3d"),
            SolverSpec::PgmRef => f.write_str("pgm-ref"),
        }
    }
}

impl SolverSpec {
    /// The proposed methods take the upper cost through its prox; the
    /// explicit baselines need it smooth.
    pub fn formulation(&self) -> Formulation {
        match self {
            SolverSpec::Adabim | SolverSpec::Stabim | SolverSpec::PgmRef => Formulation::ProxUpper,
            SolverSpec::Sedm { .. } | SolverSpec::Bigsam | SolverSpec::I3d => Formulation::SmoothUpper,
        }
    }
}

/// Every tunable read from the config, validated once.
#[derive(Debug, Clone)]
pub struct Settings {
    pub schedule: PenaltySchedule,
    pub adabim: AdaBimParams,
    pub stabim_l_f1: Option<f64>,
    pub stabim_l_f2: Option<f64>,
    pub stabim_nu: f64,
    pub sedm_factor: Option<f64>,
    pub sedm_eta: f64,
    pub sedm_nu: f64,
    pub sedm_max_backtracks: u32,
    pub bigsam_alpha1: Option<f64>,
    pub bigsam_alpha2: Option<f64>,
    pub i3d_gamma: Option<f64>,
    /// `true`: iterative-3D uses `c/(k+1)²`; `false`: the shared schedule.
    pub i3d_square: bool,
    pub pgm_sigma: Option<f64>,
    pub pgm_alpha: Option<f64>,
    pub options: RunOptions,
    pub start_value: f64,
}

pub fn parse_schedule(cfg: &Config) -> Result<PenaltySchedule> {
    let c = cfg.positive("schedule.c")?.unwrap_or(1.0);
    let sigma0 = cfg.positive("schedule.sigma0")?.unwrap_or(1.0);
    let kind = match cfg.get_str("schedule.kind").unwrap_or("harmonic") {
        "harmonic" => ScheduleKind::HarmonicClamped { c },
        "square_summable" => ScheduleKind::SquareSummable { c },
        "constant" => ScheduleKind::Constant,
        "constant_then_harmonic" => ScheduleKind::ConstantThenHarmonic {
            c,
            k0: cfg.get_or("schedule.k0", 0)?,
        },
        other => {
            return Err(CliError::Config(format!(
                "schedule.kind = {other:?} (expected harmonic, square_summable, constant, constant_then_harmonic)"
            )))
        }
    };
    Ok(PenaltySchedule::new(kind, sigma0))
}

fn unit(cfg: &Config, key: &str, default: f64) -> Result<f64> {
    let v = cfg.get_or(key, default)?;
    if !(v > 0.0 && v < 1.0) {
        return Err(CliError::Config(format!("{key} must lie in (0, 1), got {v}")));
    }
    Ok(v)
}

fn positive_count<T: FromStr + PartialEq + Default + Copy>(cfg: &Config, key: &str) -> Result<Option<T>> {
    match cfg.get::<T>(key)? {
        Some(v) if v == T::default() => Err(CliError::Config(format!("{key} must be positive"))),
        other => Ok(other),
    }
}

impl Settings {
    /// `budget.max_grad_evals` defaults to 10⁵ when no budget is given.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let defaults = AdaBimParams::default();
        let adabim = AdaBimParams {
            nu: unit(cfg, "adabim.nu", defaults.nu)?,
            eta: unit(cfg, "adabim.eta", defaults.eta)?,
            alpha0: cfg.positive("adabim.alpha0")?,
            alpha_m1: None,
            alpha_max_factor: cfg.positive("adabim.alpha_max_factor")?.unwrap_or(defaults.alpha_max_factor),
            max_backtracks: positive_count(cfg, "adabim.max_backtracks")?.unwrap_or(defaults.max_backtracks),
            linesearch: cfg.bool_or("adabim.linesearch", true)?,
            strict_moduli: false,
        };

        let max_grad_evals = positive_count::<u64>(cfg, "budget.max_grad_evals")?;
        let max_iters = positive_count::<u64>(cfg, "budget.max_iters")?;
        let wall_clock_s = cfg.positive("budget.wall_clock_s")?;
        let base = RunOptions::default();
        let options = RunOptions {
            max_grad_evals: if max_grad_evals.is_none() && max_iters.is_none() && wall_clock_s.is_none() {
                base.max_grad_evals
            } else {
                max_grad_evals
            },
            max_iters,
            wall_clock_s,
            sigma_tol: cfg.positive("tol.sigma")?.unwrap_or(base.sigma_tol),
            r_tol: cfg.positive("tol.r")?.unwrap_or(base.r_tol),
            use_tolerance: cfg.bool_or("tol.enabled", true)?,
            record_time: cfg.bool_or("output.record_time", true)?,
            record_all: cfg.bool_or("output.record_all", false)?,
        };

        let i3d_square = match cfg.get_str("i3d.penalty").unwrap_or("square") {
            "square" => true,
            "shared" => false,
            other => return Err(CliError::Config(format!("i3d.penalty = {other:?} (expected square or shared)"))),
        };

        Ok(Self {
            schedule: parse_schedule(cfg)?,
            adabim,
            stabim_l_f1: match cfg.get::<f64>("stabim.L_f1")? {
                Some(v) if v < 0.0 => return Err(CliError::Config("stabim.L_f1 must be nonnegative".into())),
                other => other,
            },
            stabim_l_f2: cfg.positive("stabim.L_f2")?,
            stabim_nu: unit(cfg, "stabim.nu", 0.98)?,
            sedm_factor: cfg.positive("sedm.alpha_max_factor")?,
            sedm_eta: unit(cfg, "sedm.eta", 0.5)?,
            sedm_nu: unit(cfg, "sedm.nu", 0.5)?,
            sedm_max_backtracks: positive_count(cfg, "sedm.max_backtracks")?.unwrap_or(60),
            bigsam_alpha1: cfg.positive("bigsam.alpha1")?,
            bigsam_alpha2: cfg.positive("bigsam.alpha2")?,
            i3d_gamma: cfg.positive("i3d.gamma")?,
            i3d_square,
            pgm_sigma: cfg.positive("pgm.sigma")?,
            pgm_alpha: cfg.positive("pgm.alpha")?,
            options,
            start_value: cfg.get_or("start.value", 0.0)?,
        })
    }

    /// Initializes `spec` on `problem` from the all-`start.value` point.
    pub fn build_solver(
        &self,
        spec: SolverSpec,
        problem: &BilevelProblem,
    ) -> std::result::Result<Box<dyn BilevelSolver>, SolverError> {
        let x0 = vec![self.start_value; problem.dim()];
        let schedule = self.schedule.clone();
        Ok(match spec {
            SolverSpec::Adabim => Box::new(AdaBim::init(problem, &x0, self.adabim.clone(), schedule)?),
            SolverSpec::Stabim => {
                let mut p = StaBimParams::from_problem(problem);
                p.l_f1 = self.stabim_l_f1.unwrap_or(p.l_f1);
                p.l_f2 = self.stabim_l_f2.unwrap_or(p.l_f2);
                p.nu = self.stabim_nu;
                Box::new(StaBim::init(problem, &x0, p, schedule)?)
            }
            SolverSpec::Sedm { factor } => {
                let mut p = SedmParams::with_factor(problem, self.sedm_factor.unwrap_or(factor));
                p.eta = self.sedm_eta;
                p.nu = self.sedm_nu;
                p.max_backtracks = self.sedm_max_backtracks;
                Box::new(Sedm::init(problem, &x0, p, schedule)?)
            }
            SolverSpec::Bigsam => {
                let mut p = BigsamParams::from_problem(problem);
                p.alpha1 = self.bigsam_alpha1.unwrap_or(p.alpha1);
                p.alpha2 = self.bigsam_alpha2.unwrap_or(p.alpha2);
                Box::new(Bigsam::init(problem, &x0, p, schedule)?)
            }
            SolverSpec::I3d => {
                let schedule = if self.i3d_square {
                    let c = match schedule.kind() {
                        ScheduleKind::HarmonicClamped { c }
                        | ScheduleKind::SquareSummable { c }
                        | ScheduleKind::ConstantThenHarmonic { c, .. } => c,
                        ScheduleKind::Constant => schedule.current(),
                    };
                    PenaltySchedule::new(ScheduleKind::SquareSummable { c }, schedule.current())
                } else {
                    schedule
                };
                let gamma = self
                    .i3d_gamma
                    .unwrap_or_else(|| I3d::default_gamma(problem, schedule.current()));
                Box::new(I3d::init(problem, &x0, gamma, schedule)?)
            }
            SolverSpec::PgmRef => {
                let sigma = self.pgm_sigma.unwrap_or(schedule.current());
                let m = problem.moduli;
                let alpha = self.pgm_alpha.unwrap_or(1.0 / (sigma * m.l_f1 + m.l_f2));
                Box::new(PgmRef::init(problem, &x0, sigma, alpha)?)
            }
        })
    }
}
