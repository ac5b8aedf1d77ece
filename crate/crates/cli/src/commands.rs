//! The `solve`, `bench` and `datagen` subcommands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bilevel_prox::prelude::*;
use bilevel_prox::problems::BuildError;
use bilevel_prox::linalg::LinearOperator;
use bilevel_prox::trace::{write_csv, RunReport};
use bilevel_prox::KnownOptima;
use rayon::prelude::*;
use serde_json::json;

use crate::binio;
use crate::config::Config;
use crate::setup::{config_seed, ProblemData, Settings, SolverSpec};
use crate::summary::{evals_to_thresholds, write_summary, StarSource, SummaryRow};
use crate::{CliError, Result};

fn output_dir(cfg: &Config, out: Option<&Path>) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(cfg.get_str("output.dir").unwrap_or("out")),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

fn write_trace(path: &Path, report: &RunReport) -> Result<()> {
    let file = File::create(path).map_err(|e| data_err(path, e))?;
    write_csv(&mut BufWriter::new(file), &report.trace).map_err(|e| data_err(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    fs::write(path, text + "\n").map_err(|e| data_err(path, e))
}

fn with_star(problem: BilevelProblem, star: Option<f64>) -> std::result::Result<BilevelProblem, SolverError> {
    match star {
        Some(s) if problem.optima.cost1_star.is_none() => {
            let optima = KnownOptima {
                cost1_star: Some(s),
                ..problem.optima
            };
            Ok(problem.with_optima(optima)?)
        }
        _ => Ok(problem),
    }
}

/// `φ1*` for gap traces: analytic, then `reference.cost1`, then (when
/// `use_reference`) the final `φ1` of a long adaBiM run.
fn resolve_star(
    cfg: &Config,
    data: &ProblemData,
    settings: &Settings,
    use_reference: bool,
) -> Result<(Option<f64>, StarSource)> {
    let upper = data
        .build(Formulation::ProxUpper)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    if let Some(s) = upper.optima.cost1_star {
        return Ok((Some(s), StarSource::Analytic));
    }
    if let Some(s) = cfg.get::<f64>("reference.cost1")? {
        return Ok((Some(s), StarSource::Config));
    }
    if !use_reference {
        return Ok((None, StarSource::None));
    }
    let budget = match cfg.get::<u64>("reference.max_grad_evals")? {
        Some(b) => b,
        None => 4 * settings.options.max_grad_evals.unwrap_or(100_000),
    };
    let options = RunOptions {
        record_time: false,
        ..RunOptions::grad_budget(budget)
    };
    let mut solver = settings
        .build_solver(SolverSpec::Adabim, &upper)
        .map_err(|e| CliError::Solver(format!("reference run: {e}")))?;
    let report = run(&upper, solver.as_mut(), &options);
    if let Some(msg) = report.error {
        return Err(CliError::Solver(format!("reference run: {msg}")));
    }
    let star = upper
        .cost1(&report.final_x)
        .ok_or_else(|| CliError::Solver("reference run: φ1 has no value oracle".into()))?;
    Ok((Some(star), StarSource::Reference))
}

enum Entry {
    Ran(RunReport),
    Inapplicable(String),
    Failed(String),
}

fn run_entry(data: &ProblemData, spec: SolverSpec, settings: &Settings, star: Option<f64>) -> Entry {
    let problem = match data.build(spec.formulation()) {
        Ok(p) => p,
        Err(BuildError::NotSmooth(_)) => return Entry::Inapplicable("upper level has a nonsmooth term".into()),
        Err(e) => return Entry::Failed(e.to_string()),
    };
    let problem = match with_star(problem, star) {
        Ok(p) => p,
        Err(e) => return Entry::Failed(e.to_string()),
    };
    match settings.build_solver(spec, &problem) {
        Ok(mut solver) => Entry::Ran(run(&problem, solver.as_mut(), &settings.options)),
        Err(SolverError::Inapplicable { reason, .. }) => Entry::Inapplicable(reason),
        Err(e) => Entry::Failed(e.to_string()),
    }
}

fn report_json(cfg: &Config, report: &RunReport, trace: &Path, star: Option<f64>, source: StarSource) -> serde_json::Value {
    json!({
        "config": cfg.entries(),
        "trace_path": trace.display().to_string(),
        "cost1_star": star,
        "cost1_star_source": source.label(),
        "report": report,
    })
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub report: RunReport,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
}

impl SolveOutcome {
    /// 0 on a tolerance or budget stop, 4 when the solver failed.
    pub fn exit_code(&self) -> i32 {
        if self.report.termination.is_error() {
            4
        } else {
            0
        }
    }
}

/// Runs the single configured solver; writes `trace_<solver>.csv` and
/// `report_<solver>.json` into the output directory.
pub fn solve(cfg: &Config, out: Option<&Path>) -> Result<SolveOutcome> {
    if cfg.get_str("solvers").is_some() {
        return Err(CliError::Config("solve takes exactly one `solver`; `solvers` is for bench".into()));
    }
    let spec: SolverSpec = cfg
        .get_str("solver")
        .ok_or_else(|| CliError::Config("`solver` is required".into()))?
        .parse()?;
    let data = ProblemData::from_config(cfg)?;
    let settings = Settings::from_config(cfg)?;
    let use_reference = cfg.bool_or("reference.enabled", false)?;
    let dir = output_dir(cfg, out)?;
    let (star, source) = resolve_star(cfg, &data, &settings, use_reference)?;

    let report = match run_entry(&data, spec, &settings, star) {
        Entry::Ran(r) => r,
        Entry::Inapplicable(reason) => return Err(CliError::Solver(format!("{spec} is not applicable: {reason}"))),
        Entry::Failed(msg) => return Err(CliError::Solver(format!("{spec}: {msg}"))),
    };
    let trace_path = dir.join(format!("trace_{spec}.csv"));
    write_trace(&trace_path, &report)?;
    let report_path = dir.join(format!("report_{spec}.json"));
    write_json(&report_path, &report_json(cfg, &report, &trace_path, star, source))?;
    Ok(SolveOutcome {
        report,
        trace_path,
        report_path,
    })
}

#[derive(Debug)]
pub struct BenchOutcome {
    pub rows: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
    pub cost1_star: Option<f64>,
    pub star_source: StarSource,
}

/// Runs every entry of `solvers` on one problem, in parallel; writes one
/// trace per run plus `summary.csv`. Inapplicable solvers get a summary row
/// and no trace.
pub fn bench(cfg: &Config, out: Option<&Path>) -> Result<BenchOutcome> {
    let names = cfg.list("solvers");
    if names.is_empty() {
        return Err(CliError::Config("`solvers` must list at least one solver".into()));
    }
    let specs = names
        .iter()
        .map(|n| n.parse::<SolverSpec>())
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = specs.iter().map(ToString::to_string).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(CliError::Config(format!("solver {l} is listed twice")));
        }
    }
    let data = ProblemData::from_config(cfg)?;
    let settings = Settings::from_config(cfg)?;
    let use_reference = cfg.bool_or("reference.enabled", true)?;
    let dir = output_dir(cfg, out)?;
    let (star, source) = resolve_star(cfg, &data, &settings, use_reference)?;

    let entries: Vec<Entry> = specs
        .par_iter()
        .map(|&spec| run_entry(&data, spec, &settings, star))
        .collect();

    let mut rows = Vec::new();
    let mut trace_paths = Vec::new();
    for (label, entry) in labels.iter().zip(entries) {
        let mut row = SummaryRow {
            solver: label.clone(),
            status: "ok",
            note: String::new(),
            iterations: None,
            grad_f2_evals: None,
            grad_f1_evals: None,
            total_backtracks: None,
            termination: String::new(),
            final_abs_gap: None,
            thresholds: [None; 7],
        };
        match entry {
            Entry::Ran(report) => {
                let path = dir.join(format!("trace_{label}.csv"));
                write_trace(&path, &report)?;
                trace_paths.push(path);
                if let Some(msg) = &report.error {
                    row.status = "error";
                    row.note = msg.clone();
                }
                row.iterations = Some(report.iterations);
                row.grad_f2_evals = Some(report.counters.grad_f2);
                row.grad_f1_evals = Some(report.counters.grad_f1);
                row.total_backtracks = Some(report.backtracks_total);
                row.termination = report.termination.label();
                row.final_abs_gap = star.and(report.final_cost1_gap()).map(f64::abs);
                row.thresholds = evals_to_thresholds(&report.trace);
            }
            Entry::Inapplicable(reason) => {
                row.status = "inapplicable";
                row.note = reason;
            }
            Entry::Failed(msg) => {
                row.status = "error";
                row.note = msg;
            }
        }
        rows.push(row);
    }

    let summary_path = dir.join("summary.csv");
    let file = File::create(&summary_path).map_err(|e| data_err(&summary_path, e))?;
    write_summary(BufWriter::new(file), &rows, star, source).map_err(|e| data_err(&summary_path, e))?;
    Ok(BenchOutcome {
        rows,
        summary_path,
        trace_paths,
        cost1_star: star,
        star_source: source,
    })
}

/// Persists generator output as binary arrays plus `params.json`.
pub fn datagen(cfg: &Config, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let kind = cfg
        .get_str("problem.kind")
        .ok_or_else(|| CliError::Config("problem.kind is required".into()))?;
    if !DATAGEN_KINDS.contains(&kind) {
        return Err(CliError::Config(format!(
            "datagen cannot generate {kind:?} (expected linear_inverse, phillips, foxgood, baart or logistic)"
        )));
    }
    let seed = config_seed(cfg)?;
    let data = ProblemData::from_config(cfg)?;
    let dir = output_dir(cfg, out)?;

    let mut arrays: Vec<(&str, usize, usize, Vec<f64>)> = Vec::new();
    let params = match &data {
        ProblemData::LinearInverse { inst, .. } => {
            let (m, n) = (inst.a.rows(), inst.a.cols());
            arrays.push(("A", m, n, inst.a.as_slice().to_vec()));
            arrays.push(("b", m, 1, inst.b.clone()));
            arrays.push(("x_gen", n, 1, inst.x_gen.clone()));
            json!({ "m": m, "n": n, "nstar": inst.x_gen.iter().filter(|v| **v != 0.0).count(), "l_f2": inst.l_f2 })
        }
        ProblemData::Integral(inst) => {
            let n = inst.a.cols();
            arrays.push(("A", n, n, inst.a.as_slice().to_vec()));
            arrays.push(("b", n, 1, inst.b.clone()));
            arrays.push(("x_exact", n, 1, inst.x_exact.clone()));
            json!({ "n": n, "noise": inst.noise, "l_f2": inst.l_f2 })
        }
        ProblemData::Logistic { a, labels, .. } => {
            let (m, n) = (a.rows(), a.cols());
            let dense: Vec<f64> = (0..m)
                .flat_map(|i| {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    a.apply_t(&e)
                })
                .collect();
            arrays.push(("A", m, n, dense));
            arrays.push(("labels", m, 1, labels.clone()));
            json!({ "m": m, "n": n })
        }
        _ => unreachable!("kind checked above"),
    };

    let mut files = serde_json::Map::new();
    let mut written = Vec::new();
    for (name, rows, cols, values) in &arrays {
        let path = dir.join(format!("{name}.bin"));
        binio::write_array(&path, *rows, *cols, values).map_err(|e| data_err(&path, e))?;
        files.insert(format!("{name}.bin"), json!({ "rows": rows, "cols": cols }));
        written.push(path);
    }
    let sidecar = dir.join("params.json");
    write_json(
        &sidecar,
        &json!({
            "kind": kind,
            "seed": seed,
            "params": params,
            "files": files,
            "layout": "header: rows, cols as u64 little-endian; then rows*cols f64 little-endian, row-major",
        }),
    )?;
    written.push(sidecar);
    Ok(written)
}

/// Kinds accepted by [`datagen`].
pub const DATAGEN_KINDS: [&str; 5] = ["linear_inverse", "phillips", "foxgood", "baart", "logistic"];
