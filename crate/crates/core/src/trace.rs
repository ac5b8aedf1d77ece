//! Per-iteration records, checkpoint spacing and run reports.

use std::io::{self, Write};

use serde::Serialize;

use crate::problem::CounterSnapshot;

pub const CSV_HEADER: &str =
    "k,grad_f2_evals,f_value_evals,backtracks_cum,alpha,sigma,cost1_gap,lower_resid,time_s";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: u64,
    pub grad_f2_evals: u64,
    pub f_value_evals: u64,
    pub backtracks_cum: u64,
    pub alpha: f64,
    pub sigma: f64,
    /// `φ1(x^k) − φ1*` when the optimal value is known, else `φ1(x^k)`.
    pub cost1_gap: f64,
    pub lower_resid: f64,
    pub time_s: f64,
}

impl TraceRecord {
    pub fn write_csv_row(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            self.k,
            self.grad_f2_evals,
            self.f_value_evals,
            self.backtracks_cum,
            self.alpha,
            self.sigma,
            self.cost1_gap,
            self.lower_resid,
            self.time_s
        )
    }
}

pub fn write_csv(w: &mut impl Write, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        r.write_csv_row(w)?;
    }
    Ok(())
}

/// Every iteration up to `dense_until`, then once per crossing of the
/// geometric grid `dense_until·ratio^j`.
#[derive(Debug, Clone)]
pub struct Checkpoints {
    dense_until: u64,
    ratio: f64,
    next: f64,
}

impl Default for Checkpoints {
    fn default() -> Self {
        Self::new(1000, 1.05)
    }
}

impl Checkpoints {
    pub fn new(dense_until: u64, ratio: f64) -> Self {
        assert!(ratio > 1.0);
        Self {
            dense_until,
            ratio,
            next: dense_until as f64 * ratio,
        }
    }

    /// Call with increasing `k`.
    pub fn should_record(&mut self, k: u64) -> bool {
        if k <= self.dense_until {
            return true;
        }
        let mut hit = false;
        while k as f64 >= self.next {
            hit = true;
            self.next *= self.ratio;
        }
        hit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetGradevals,
    BudgetIters,
    BudgetTime,
    Tolerance,
    Error(String),
}

impl Termination {
    pub fn label(&self) -> String {
        match self {
            Termination::BudgetGradevals => "budget_gradevals".into(),
            Termination::BudgetIters => "budget_iters".into(),
            Termination::BudgetTime => "budget_time".into(),
            Termination::Tolerance => "tolerance".into(),
            Termination::Error(code) => format!("error({code})"),
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Termination::Error(_))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub solver: String,
    pub iterations: u64,
    pub termination: Termination,
    /// Human-readable error message when the run failed.
    pub error: Option<String>,
    pub counters: CounterSnapshot,
    pub backtracks_total: u64,
    pub final_norm: f64,
    /// Leading components of the final iterate.
    pub final_head: Vec<f64>,
    #[serde(skip)]
    pub final_x: Vec<f64>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

impl RunReport {
    pub fn final_cost1_gap(&self) -> Option<f64> {
        self.trace.last().map(|r| r.cost1_gap)
    }
}
