//! Per-solver summary: ∇f2 evaluations needed to bring `|cost1_gap|` below
//! each decade `10⁰ … 10⁻⁶`, plus totals.

use std::io;

use bilevel_prox::trace::TraceRecord;

pub const THRESHOLD_EXPONENTS: [i32; 7] = [0, -1, -2, -3, -4, -5, -6];

/// Where the `φ1*` used for the gap came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarSource {
    Analytic,
    Config,
    /// Final value of a long adaBiM run.
    Reference,
    /// No value: gaps are raw `φ1` and thresholds are left empty.
    None,
}

impl StarSource {
    pub fn label(&self) -> &'static str {
        match self {
            StarSource::Analytic => "analytic",
            StarSource::Config => "config",
            StarSource::Reference => "reference",
            StarSource::None => "none",
        }
    }
}

/// First recorded `grad_f2_evals` at which `|gap| ≤ 10^e`, per exponent.
pub fn evals_to_thresholds(trace: &[TraceRecord]) -> [Option<u64>; 7] {
    THRESHOLD_EXPONENTS.map(|e| {
        let thr = 10f64.powi(e);
        trace
            .iter()
            .find(|r| r.cost1_gap.abs() <= thr)
            .map(|r| r.grad_f2_evals)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: String,
    /// `ok`, `inapplicable` or `error`.
    pub status: &'static str,
    pub note: String,
    pub iterations: Option<u64>,
    pub grad_f2_evals: Option<u64>,
    pub grad_f1_evals: Option<u64>,
    pub total_backtracks: Option<u64>,
    pub termination: String,
    pub final_abs_gap: Option<f64>,
    pub thresholds: [Option<u64>; 7],
}

pub fn header() -> Vec<String> {
    let mut h: Vec<String> = [
        "solver",
        "status",
        "note",
        "iterations",
        "grad_f2_evals",
        "grad_f1_evals",
        "total_backtracks",
        "termination",
        "final_abs_gap",
        "cost1_star",
        "cost1_star_source",
    ]
    .map(String::from)
    .to_vec();
    h.extend(THRESHOLD_EXPONENTS.map(|e| format!("evals_to_gap_1e{e}")));
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary(
    w: impl io::Write,
    rows: &[SummaryRow],
    cost1_star: Option<f64>,
    source: StarSource,
) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header())?;
    for r in rows {
        let mut rec = vec![
            r.solver.clone(),
            r.status.to_string(),
            r.note.clone(),
            opt(r.iterations),
            opt(r.grad_f2_evals),
            opt(r.grad_f1_evals),
            opt(r.total_backtracks),
            r.termination.clone(),
            opt(r.final_abs_gap),
            opt(cost1_star),
            source.label().to_string(),
        ];
        let thresholds = if source == StarSource::None {
            [None; 7]
        } else {
            r.thresholds
        };
        rec.extend(thresholds.map(opt));
        out.write_record(&rec)?;
    }
    out.flush()
}
