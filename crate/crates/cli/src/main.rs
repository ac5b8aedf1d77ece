use std::path::PathBuf;
use std::process::ExitCode;

use bilevel_bench::{commands, resolve_threads, with_threads, CliError, Config};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bilevel-bench", version, about = "Benchmark harness for simple bilevel solvers")]
struct Cli {
    /// Worker threads (falls back to BILEVEL_PROX_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write its trace and report.
    Solve(Common),
    /// Run a solver suite on one problem and write traces plus a summary.
    Bench(Common),
    /// Write generator output as binary arrays with a JSON sidecar.
    Datagen {
        #[command(flatten)]
        common: Common,
        /// Generator kind (overrides problem.kind).
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(commands::DATAGEN_KINDS))]
        kind: Option<String>,
    },
}

fn load(common: &Common, kind: Option<&str>) -> Result<Config, CliError> {
    let mut cfg = Config::load(common.config.as_deref())?;
    for pair in &common.set {
        cfg.set(pair)?;
    }
    if let Some(k) = kind {
        cfg.set(&format!("problem.kind={k}"))?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let threads = resolve_threads(cli.threads)?;
    match cli.command {
        Command::Solve(common) => {
            let cfg = load(&common, None)?;
            let outcome = with_threads(threads, || commands::solve(&cfg, common.out.as_deref()))??;
            let r = &outcome.report;
            println!(
                "{}: {} after {} iterations, {} grad_f2 evals, {} backtracks; trace {}",
                r.solver,
                r.termination.label(),
                r.iterations,
                r.counters.grad_f2,
                r.backtracks_total,
                outcome.trace_path.display()
            );
            if let Some(msg) = &r.error {
                eprintln!("error: {msg}");
            }
            Ok(outcome.exit_code())
        }
        Command::Bench(common) => {
            let cfg = load(&common, None)?;
            let outcome = with_threads(threads, || commands::bench(&cfg, common.out.as_deref()))??;
            for row in &outcome.rows {
                println!("{:<10} {:<13} {} {}", row.solver, row.status, row.termination, row.note);
            }
            println!("summary {}", outcome.summary_path.display());
            Ok(0)
        }
        Command::Datagen { common, kind } => {
            let cfg = load(&common, kind.as_deref())?;
            for path in commands::datagen(&cfg, common.out.as_deref())? {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
