//! Flat `key = value` configuration with dotted keys.
//!
//! ```text
//! # comment lines start with '#'
//! problem.kind = linear_inverse
//! problem.m = 20
//! solver = adabim
//! ```
//!
//! `--set key=value` overrides are applied after the file. Unknown keys and
//! duplicate keys within one file are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::{CliError, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "problem.kind",
    "problem.upper",
    "problem.m",
    "problem.n",
    "problem.nstar",
    "problem.seed",
    "problem.noise",
    "data.path",
    "data.add_bias",
    "solver",
    "solvers",
    "schedule.kind",
    "schedule.c",
    "schedule.sigma0",
    "schedule.k0",
    "adabim.nu",
    "adabim.eta",
    "adabim.alpha0",
    "adabim.alpha_max_factor",
    "adabim.max_backtracks",
    "adabim.linesearch",
    "stabim.L_f1",
    "stabim.L_f2",
    "stabim.nu",
    "sedm.alpha_max_factor",
    "sedm.eta",
    "sedm.nu",
    "sedm.max_backtracks",
    "bigsam.alpha1",
    "bigsam.alpha2",
    "i3d.gamma",
    "i3d.penalty",
    "pgm.sigma",
    "pgm.alpha",
    "budget.max_grad_evals",
    "budget.max_iters",
    "budget.wall_clock_s",
    "tol.enabled",
    "tol.sigma",
    "tol.r",
    "start.value",
    "output.dir",
    "output.record_time",
    "output.record_all",
    "reference.enabled",
    "reference.cost1",
    "reference.max_grad_evals",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = split_pair(line)
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
            if cfg.values.contains_key(key) {
                return Err(CliError::Config(format!("line {}: duplicate key {key:?}", i + 1)));
            }
            cfg.insert(key, value)?;
        }
        Ok(cfg)
    }

    /// Reads `path` (data error when unreadable), or starts empty.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
                Config::parse(&text)
            }
        }
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, pair: &str) -> Result<()> {
        let (key, value) =
            split_pair(pair).ok_or_else(|| CliError::Config(format!("--set expects key=value, got {pair:?}")))?;
        self.insert(key, value)
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get_str(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Config(format!("{key} = {v:?} is not a valid {}", std::any::type_name::<T>()))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// A positive float, when present.
    pub fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.get::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Config(format!("{key} must be positive, got {v}"))),
            other => Ok(other),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get_str(key) {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => Err(CliError::Config(format!("{key} = {v:?} is not a boolean"))),
        }
    }

    /// Comma-separated list; empty entries are dropped.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get_str(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then(|| (k, v.trim()))
}
