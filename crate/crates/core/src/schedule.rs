//! Inverse-penalty sequences `σ_k`.
//!
//! Every generated sequence satisfies `σ_{k+1} ∈ [¾σ_k, σ_k]`: the raw
//! target value is clamped into that box, so schedules such as `c/(k+1)`
//! move geometrically during a short initial prefix and then follow the
//! target exactly.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// target `c/(k+1)`
    HarmonicClamped { c: f64 },
    /// target `c/(k+1)²`; only for methods that do not need slow control.
    SquareSummable { c: f64 },
    /// `σ0` for `k ≤ k0`, then target `c/(k − k0 + 1)`.
    ConstantThenHarmonic { c: f64, k0: u64 },
    /// `σ_k = σ0` for all `k`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySchedule {
    kind: ScheduleKind,
    k: u64,
    sigma: f64,
}

impl PenaltySchedule {
    pub fn new(kind: ScheduleKind, sigma0: f64) -> Self {
        assert!(sigma0 > 0.0 && sigma0.is_finite(), "sigma0 must be positive");
        Self {
            kind,
            k: 0,
            sigma: sigma0,
        }
    }

    pub fn harmonic(sigma0: f64) -> Self {
        Self::new(ScheduleKind::HarmonicClamped { c: 1.0 }, sigma0)
    }

    pub fn constant(sigma: f64) -> Self {
        Self::new(ScheduleKind::Constant, sigma)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn index(&self) -> u64 {
        self.k
    }

    /// Current value `σ_k`.
    pub fn current(&self) -> f64 {
        self.sigma
    }

    /// Unclamped value at index `k`, `None` for `Constant`.
    fn target(&self, k: u64) -> Option<f64> {
        let kf = k as f64;
        match self.kind {
            ScheduleKind::HarmonicClamped { c } => Some(c / (kf + 1.0)),
            ScheduleKind::SquareSummable { c } => Some(c / ((kf + 1.0) * (kf + 1.0))),
            ScheduleKind::ConstantThenHarmonic { c, k0 } => {
                if k <= k0 {
                    None
                } else {
                    Some(c / ((k - k0) as f64 + 1.0))
                }
            }
            ScheduleKind::Constant => None,
        }
    }

    /// Advances to `σ_{k+1}` and returns it.
    pub fn next_sigma(&mut self) -> f64 {
        let prev = self.sigma;
        let next = match self.target(self.k + 1) {
            Some(t) => t.max(0.75 * prev).min(prev),
            None => prev,
        };
        self.k += 1;
        self.sigma = next;
        next
    }
}

impl Iterator for PenaltySchedule {
    type Item = f64;

    /// Yields `σ_0, σ_1, …` starting from the current value.
    fn next(&mut self) -> Option<f64> {
        let cur = self.sigma;
        self.next_sigma();
        Some(cur)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Check {
    pub pass: bool,
    /// First index `k` at which the property failed, when it is pointwise.
    pub first_violation: Option<u64>,
}

impl Check {
    fn ok() -> Self {
        Check {
            pass: true,
            first_violation: None,
        }
    }
}

/// Numerical evidence for the slow-control conditions over a finite horizon.
///
/// Pointwise checks: positivity with monotone decrease, and the box
/// `σ_{k+1} ≥ ¾σ_k`. Asymptotic properties are judged at the horizon `N`:
/// vanishing means `σ_N ≤ σ_0/√N`, divergence means `Σ_{k<N} σ_k ≥ ½σ_0 ln N`,
/// and ratio convergence means `1 − σ_N/σ_{N−1} ≤ 10/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlowControlReport {
    pub monotone: Check,
    pub box_constraint: Check,
    pub vanishing: Check,
    pub divergent_sum: Check,
    pub ratio_to_one: Check,
}

impl SlowControlReport {
    pub fn all_pass(&self) -> bool {
        self.monotone.pass
            && self.box_constraint.pass
            && self.vanishing.pass
            && self.divergent_sum.pass
            && self.ratio_to_one.pass
    }
}

/// Checks the first `horizon + 1` values of `seq` (`σ_0 … σ_N`).
pub fn validate_slow_control(seq: impl IntoIterator<Item = f64>, horizon: u64) -> SlowControlReport {
    assert!(horizon >= 2, "horizon must be at least 2");
    let mut it = seq.into_iter();
    let sigma0 = it.next().expect("empty sequence");
    let mut monotone = Check {
        pass: sigma0 > 0.0,
        first_violation: if sigma0 > 0.0 { None } else { Some(0) },
    };
    let mut box_constraint = Check::ok();
    let mut prev = sigma0;
    let mut sum = sigma0;
    let mut last_ratio = 1.0;
    let mut last = sigma0;
    for k in 0..horizon {
        let Some(next) = it.next() else { break };
        if monotone.pass && !(next > 0.0 && next <= prev) {
            monotone = Check {
                pass: false,
                first_violation: Some(k),
            };
        }
        if box_constraint.pass && next < 0.75 * prev {
            box_constraint = Check {
                pass: false,
                first_violation: Some(k),
            };
        }
        last_ratio = next / prev;
        if k + 1 < horizon {
            sum += next;
        }
        prev = next;
        last = next;
    }
    let n = horizon as f64;
    let judge = |pass: bool| Check {
        pass,
        first_violation: if pass { None } else { Some(horizon) },
    };
    SlowControlReport {
        monotone,
        box_constraint,
        vanishing: judge(last <= sigma0 / n.sqrt()),
        divergent_sum: judge(sum >= 0.5 * sigma0 * n.ln()),
        ratio_to_one: judge((1.0 - last_ratio).abs() <= 10.0 / n),
    }
}
