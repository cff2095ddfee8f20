//! Replicated simulation studies.

use std::fmt::Write as _;

use invreg_core::indirect::{EstimatorName, FitMetadata, Fitter, TuningPolicy};
use invreg_core::simgen::{generate, ModelSpec, NORMAL_METHOD};
use invreg_core::sparse_est::{GlassoSettings, CHANGE_TOL, MAX_SWEEPS};
use invreg_core::tuning::Grid;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::metrics::ModelErrorScorer;
use crate::{BenchError, Result};

pub const DEFAULT_REPLICATIONS: usize = 50;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Parameter cells; their `seed` fields are ignored.
    pub cells: Vec<ModelSpec>,
    pub estimators: Vec<EstimatorName>,
    pub replications: usize,
    pub base_seed: u64,
    /// Replaces the default tuning grid when set.
    pub grid: Option<Grid>,
    /// Worker threads; 0 uses rayon's default. Does not affect results.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(cells: Vec<ModelSpec>, estimators: Vec<EstimatorName>) -> Self {
        Self {
            cells,
            estimators,
            replications: DEFAULT_REPLICATIONS,
            base_seed: 0,
            grid: None,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(BenchError::Config("no parameter cells".into()));
        }
        if self.estimators.is_empty() {
            return Err(BenchError::Config("no estimators".into()));
        }
        if self.replications == 0 {
            return Err(BenchError::Config("replications must be positive".into()));
        }
        for cell in &self.cells {
            cell.validate()?;
        }
        Ok(())
    }

    /// Everything that determines the report, one item per line.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for cell in &self.cells {
            let _ = writeln!(s, "cell {}", cell_label(cell));
        }
        let names: Vec<&str> = self.estimators.iter().map(|e| e.as_str()).collect();
        let _ = writeln!(s, "estimators {}", names.join(","));
        let _ = writeln!(s, "replications {}", self.replications);
        let _ = writeln!(s, "base_seed {}", self.base_seed);
        let grid = self.grid.clone().unwrap_or_default();
        let values: Vec<String> = grid.values().iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "grid {}", values.join(","));
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    pub(crate) fn policy(&self, seed: u64) -> TuningPolicy {
        TuningPolicy {
            grid: self.grid.clone().unwrap_or_default(),
            fold_seed: seed,
            ..TuningPolicy::default()
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed of replication `rep`; shared by every cell.
pub fn replication_seed(base_seed: u64, rep: usize) -> u64 {
    base_seed ^ rep as u64
}

pub fn design_name(cell: &ModelSpec) -> &'static str {
    match cell {
        ModelSpec::SparseInverse(_) => "sparse-inverse",
        ModelSpec::ReducedRankInverse(_) => "rr-inverse",
        ModelSpec::ReducedRankForward(_) => "rr-forward",
    }
}

/// Named parameters of a cell, in a fixed order.
pub fn cell_params(cell: &ModelSpec) -> Vec<(&'static str, f64)> {
    let (n, p, q) = cell.dims();
    let mut out = vec![("n", n as f64), ("p", p as f64), ("q", q as f64)];
    match cell {
        ModelSpec::SparseInverse(s) => {
            out.extend([("rho_y", s.rho_y), ("rho_delta", s.rho_delta), ("s_star", s.s_star)])
        }
        ModelSpec::ReducedRankInverse(s) => {
            out.extend([("rho_y", s.rho_y), ("rho_delta", s.rho_delta), ("r_star", s.r_star as f64)])
        }
        ModelSpec::ReducedRankForward(s) => {
            out.extend([("rho_x", s.rho_x), ("rho_e", s.rho_e), ("r_star", s.r_star as f64)])
        }
    }
    out
}

pub fn cell_label(cell: &ModelSpec) -> String {
    let params: Vec<String> = cell_params(cell).iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{} {}", design_name(cell), params.join(" "))
}

/// Mean and standard error (sample sd over `√count`) of the present values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary {
            mean: f64::NAN,
            se: f64::NAN,
            count,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let se = if count > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        f64::NAN
    };
    Summary { mean, se, count }
}

/// Losses of one estimator in one cell, indexed by replication.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: ModelSpec,
    pub estimator: EstimatorName,
    /// `None` where the fit failed.
    pub losses: Vec<Option<f64>>,
    pub failures: Vec<Option<String>>,
    pub metadata: Vec<Option<FitMetadata>>,
}

impl CellResult {
    pub fn present(&self) -> Vec<f64> {
        self.losses.iter().flatten().copied().collect()
    }

    pub fn summary(&self) -> Summary {
        summarize(&self.present())
    }

    pub fn missing(&self) -> usize {
        self.losses.iter().filter(|l| l.is_none()).count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
    pub replications: usize,
    pub normal_method: &'static str,
    pub solver: String,
    pub version: &'static str,
}

pub(crate) fn solver_description() -> String {
    let g = GlassoSettings::default();
    format!(
        "lasso: change_tol={CHANGE_TOL:e}, max_sweeps={MAX_SWEEPS}; glasso: kkt_tol={:e}, relaxed_kkt_tol={:e} after {} sweeps, max_sweeps={}",
        g.kkt_tol, g.relaxed_kkt_tol, g.relax_after, g.max_sweeps
    )
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<ModelSpec>,
    pub estimators: Vec<EstimatorName>,
    /// Cell-major, then estimator in configuration order.
    pub results: Vec<CellResult>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn get(&self, cell: usize, estimator: EstimatorName) -> Option<&CellResult> {
        let e = self.estimators.iter().position(|&n| n == estimator)?;
        (cell < self.cells.len()).then(|| &self.results[cell * self.estimators.len() + e])
    }
}

struct RepOutcome {
    loss: Option<f64>,
    failure: Option<String>,
    metadata: Option<FitMetadata>,
}

fn failed(reason: String, k: usize) -> Vec<RepOutcome> {
    (0..k)
        .map(|_| RepOutcome {
            loss: None,
            failure: Some(reason.clone()),
            metadata: None,
        })
        .collect()
}

fn run_replication(config: &ExperimentConfig, cell: &ModelSpec, rep: usize) -> Vec<RepOutcome> {
    let k = config.estimators.len();
    let seed = replication_seed(config.base_seed, rep);
    let (truth, data) = match generate(&cell.with_seed(seed)) {
        Ok(v) => v,
        Err(e) => return failed(format!("data generation: {e}"), k),
    };
    let scorer = match ModelErrorScorer::new(&truth) {
        Ok(s) => s,
        Err(e) => return failed(format!("scoring: {e}"), k),
    };
    let fitter = match Fitter::new(&data, Some(&truth), config.policy(seed)) {
        Ok(f) => f,
        Err(e) => return failed(e.to_string(), k),
    };
    config
        .estimators
        .iter()
        .map(|&name| match fitter.fit(name).map_err(BenchError::from).and_then(|est| {
            let loss = scorer.score(&est.beta_hat)?;
            Ok((loss, est.metadata))
        }) {
            Ok((loss, meta)) => RepOutcome {
                loss: Some(loss),
                failure: None,
                metadata: Some(meta),
            },
            Err(e) => RepOutcome {
                loss: None,
                failure: Some(e.to_string()),
                metadata: None,
            },
        })
        .collect()
}

pub(crate) fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs every estimator on every replication of every cell.
///
/// Estimator failures are recorded per replication, not raised. The report
/// depends only on the configuration, never on the worker count.
pub fn run_simulation(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.cells.len())
        .flat_map(|c| (0..config.replications).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<Vec<RepOutcome>> = with_workers(config.workers, || {
        jobs.par_iter()
            .map(|&(c, r)| run_replication(config, &config.cells[c], r))
            .collect()
    })?;

    let reps = config.replications;
    let mut results = Vec::with_capacity(config.cells.len() * config.estimators.len());
    for (c, cell) in config.cells.iter().enumerate() {
        for (e, &estimator) in config.estimators.iter().enumerate() {
            let mut res = CellResult {
                cell: cell.with_seed(0),
                estimator,
                losses: Vec::with_capacity(reps),
                failures: Vec::with_capacity(reps),
                metadata: Vec::with_capacity(reps),
            };
            for rep in 0..reps {
                let o = &outcomes[c * reps + rep][e];
                res.losses.push(o.loss);
                res.failures.push(o.failure.clone());
                res.metadata.push(o.metadata.clone());
            }
            results.push(res);
        }
    }
    Ok(ExperimentReport {
        cells: config.cells.iter().map(|c| c.with_seed(0)).collect(),
        estimators: config.estimators.clone(),
        results,
        provenance: Provenance {
            config_hash: config.hash(),
            base_seed: config.base_seed,
            replications: reps,
            normal_method: NORMAL_METHOD,
            solver: solver_description(),
            version: env!("CARGO_PKG_VERSION"),
        },
    })
}
