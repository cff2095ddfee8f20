//! Plain-text `key=value` configuration files.
//!
//! Keys are the long CLI flag names without dashes (`rho-y`, `s-star`, ...);
//! underscores are accepted too. `#` starts a comment. List-valued keys take
//! comma-separated values, and the cells of a simulation are the Cartesian
//! product of all listed design parameters.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use invreg_core::indirect::EstimatorName;
use invreg_core::simgen::ModelSpec;
use invreg_core::tuning::Grid;

use crate::decay::{DecayConfig, DecayTarget};
use crate::experiment::{ExperimentConfig, DEFAULT_REPLICATIONS};
use crate::holdout::{HoldoutConfig, DEFAULT_HOLDOUT_REPLICATIONS, DEFAULT_TEST_FRACTION};
use crate::tables::{rr_forward_cell, rr_inverse_cell, sparse_cell};
use crate::{BenchError, Result};

pub type Settings = BTreeMap<String, String>;

const KNOWN_KEYS: [&str; 22] = [
    "design",
    "n",
    "p",
    "q",
    "rho-y",
    "rho-delta",
    "rho-x",
    "rho-e",
    "s-star",
    "r-star",
    "estimators",
    "estimator",
    "reps",
    "seed",
    "workers",
    "grid",
    "out",
    "data",
    "test-frac",
    "n-list",
    "table",
    "config",
];

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('_', "-")
}

pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Parse(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        let key = normalize_key(k);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(BenchError::Parse(format!("line {}: unknown key {key:?}", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_settings(path: &Path) -> Result<Settings> {
    parse_settings(&std::fs::read_to_string(path)?)
}

/// Applies `overrides` on top of `base`; `None` values leave `base` alone.
pub fn merge<'a>(base: &mut Settings, overrides: impl IntoIterator<Item = (&'a str, Option<String>)>) {
    for (k, v) in overrides {
        if let Some(v) = v {
            base.insert(normalize_key(k), v);
        }
    }
}

fn parse_one<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| BenchError::Config(format!("{key}: cannot parse {raw:?}")))
}

fn list<T: FromStr>(s: &Settings, key: &str) -> Result<Option<Vec<T>>> {
    let Some(raw) = s.get(key) else {
        return Ok(None);
    };
    let items: Vec<T> = raw
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_one(key, t))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(BenchError::Config(format!("{key} is empty")));
    }
    Ok(Some(items))
}

fn required_list<T: FromStr>(s: &Settings, key: &str) -> Result<Vec<T>> {
    list(s, key)?.ok_or_else(|| BenchError::Config(format!("missing {key}")))
}

fn scalar<T: FromStr>(s: &Settings, key: &str, default: T) -> Result<T> {
    match s.get(key) {
        Some(raw) => parse_one(key, raw),
        None => Ok(default),
    }
}

fn estimators(s: &Settings) -> Result<Vec<EstimatorName>> {
    let names: Vec<String> = required_list(s, "estimators")?;
    names
        .iter()
        .map(|n| n.parse().map_err(|e| BenchError::Config(format!("estimators: {e}"))))
        .collect()
}

fn grid(s: &Settings) -> Result<Option<Grid>> {
    Ok(match list::<f64>(s, "grid")? {
        Some(values) => Some(Grid::new(values)?),
        None => None,
    })
}

/// Design cells from the settings; `n` may be omitted when `n_default` is set.
fn cells(s: &Settings, n_default: Option<usize>) -> Result<Vec<ModelSpec>> {
    let design = s
        .get("design")
        .ok_or_else(|| BenchError::Config("missing design".into()))?
        .as_str();
    let (keys, rank): ([&str; 3], bool) = match design {
        "sparse-inverse" => (["rho-y", "rho-delta", "s-star"], false),
        "rr-inverse" => (["rho-y", "rho-delta", "r-star"], true),
        "rr-forward" => (["rho-x", "rho-e", "r-star"], true),
        other => {
            return Err(BenchError::Config(format!(
                "unknown design {other:?}; expected sparse-inverse, rr-inverse or rr-forward"
            )))
        }
    };
    for foreign in ["rho-y", "rho-delta", "rho-x", "rho-e", "s-star", "r-star"] {
        if s.contains_key(foreign) && !keys.contains(&foreign) {
            return Err(BenchError::Config(format!("{foreign} does not apply to design {design}")));
        }
    }
    let ns: Vec<usize> = match (list(s, "n")?, n_default) {
        (Some(v), _) => v,
        (None, Some(n)) => vec![n],
        (None, None) => return Err(BenchError::Config("missing n".into())),
    };
    let ps: Vec<usize> = required_list(s, "p")?;
    let qs: Vec<usize> = required_list(s, "q")?;
    let a: Vec<f64> = required_list(s, keys[0])?;
    let b: Vec<f64> = required_list(s, keys[1])?;
    let levels: Vec<f64> = if rank {
        required_list::<usize>(s, keys[2])?.into_iter().map(|r| r as f64).collect()
    } else {
        required_list(s, keys[2])?
    };
    let mut out = Vec::new();
    for &n in &ns {
        for &p in &ps {
            for &q in &qs {
                for &ra in &a {
                    for &rb in &b {
                        for &level in &levels {
                            let cell = match design {
                                "sparse-inverse" => sparse_cell(n, p, q, (ra, rb, level)),
                                "rr-inverse" => rr_inverse_cell(n, p, q, (ra, rb, level as usize)),
                                _ => rr_forward_cell(n, p, q, (ra, rb, level as usize)),
                            };
                            cell.validate()?;
                            out.push(cell);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn simulation_config(s: &Settings) -> Result<ExperimentConfig> {
    let config = ExperimentConfig {
        cells: cells(s, None)?,
        estimators: estimators(s)?,
        replications: scalar(s, "reps", DEFAULT_REPLICATIONS)?,
        base_seed: scalar(s, "seed", 0)?,
        grid: grid(s)?,
        workers: scalar(s, "workers", 0)?,
    };
    config.validate()?;
    Ok(config)
}

pub fn holdout_config(s: &Settings) -> Result<HoldoutConfig> {
    Ok(HoldoutConfig {
        test_fraction: scalar(s, "test-frac", DEFAULT_TEST_FRACTION)?,
        replications: scalar(s, "reps", DEFAULT_HOLDOUT_REPLICATIONS)?,
        estimators: estimators(s)?,
        seed: scalar(s, "seed", 0)?,
        grid: grid(s)?,
        workers: scalar(s, "workers", 0)?,
    })
}

pub fn decay_config(s: &Settings) -> Result<DecayConfig> {
    let n_list: Vec<usize> = required_list(s, "n-list")?;
    let cell_list = cells(s, n_list.first().copied())?;
    let [cell] = cell_list.as_slice() else {
        return Err(BenchError::Config(format!(
            "decay needs exactly one design cell, got {}",
            cell_list.len()
        )));
    };
    let target = match s.get("estimator").map(|v| v.trim()) {
        None => return Err(BenchError::Config("missing estimator".into())),
        Some(v) if v.eq_ignore_ascii_case("population") => DecayTarget::Population,
        Some(v) => DecayTarget::Estimator(v.parse().map_err(|e| BenchError::Config(format!("estimator: {e}")))?),
    };
    Ok(DecayConfig {
        cell: *cell,
        n_list,
        target,
        replications: scalar(s, "reps", DEFAULT_REPLICATIONS)?,
        base_seed: scalar(s, "seed", 0)?,
        grid: grid(s)?,
        workers: scalar(s, "workers", 0)?,
    })
}
