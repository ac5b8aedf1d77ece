//! Benchmark harness around `bilevel_prox`: flat key/value configs, problem
//! and solver construction, trace/summary CSV output and generator dumps.
//!
//! The binary is a thin wrapper; everything here is usable from tests.

pub mod binio;
pub mod commands;
pub mod config;
pub mod setup;
pub mod summary;

use thiserror::Error;

pub use commands::{bench, datagen, solve, BenchOutcome, SolveOutcome};
pub use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// `--threads`, else `BILEVEL_PROX_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Config("--threads must be positive".into()))
        } else {
            Ok(Some(n))
        };
    }
    match std::env::var("BILEVEL_PROX_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("BILEVEL_PROX_THREADS={v:?} is not a positive integer"))),
        },
        _ => Ok(None),
    }
}

/// Runs `f` inside a rayon pool with the requested width.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
