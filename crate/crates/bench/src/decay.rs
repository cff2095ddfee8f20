//! Estimation error as the sample size grows.

use invreg_core::indirect::{assemble_beta, EstimatorName, Fitter, InversePlugins, TuningPolicy};
use invreg_core::simgen::{generate, ModelSpec};
use invreg_core::tuning::Grid;
use rayon::prelude::*;

use crate::experiment::{replication_seed, summarize, with_workers, Summary};
use crate::metrics::spectral_error;
use crate::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayTarget {
    Estimator(EstimatorName),
    /// Assembly from the true inverse-regression parameters.
    Population,
}

#[derive(Debug, Clone)]
pub struct DecayConfig {
    /// The cell's `n` and `seed` are replaced.
    pub cell: ModelSpec,
    pub n_list: Vec<usize>,
    pub target: DecayTarget,
    pub replications: usize,
    pub base_seed: u64,
    pub grid: Option<Grid>,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct DecayRow {
    pub n: usize,
    /// `‖β̂ − β*‖₂` per replication.
    pub errors: Vec<Option<f64>>,
    pub failures: Vec<Option<String>>,
}

impl DecayRow {
    pub fn summary(&self) -> Summary {
        let v: Vec<f64> = self.errors.iter().flatten().copied().collect();
        summarize(&v)
    }

    pub fn missing(&self) -> usize {
        self.errors.iter().filter(|e| e.is_none()).count()
    }
}

fn one(config: &DecayConfig, n: usize, rep: usize) -> Result<f64> {
    let seed = replication_seed(config.base_seed, rep);
    let (truth, data) = generate(&config.cell.with_n(n).with_seed(seed))?;
    let beta_hat = match config.target {
        DecayTarget::Population => assemble_beta(&InversePlugins::population(&truth))?,
        DecayTarget::Estimator(name) => {
            let policy = TuningPolicy {
                grid: config.grid.clone().unwrap_or_default(),
                fold_seed: seed,
                ..TuningPolicy::default()
            };
            Fitter::new(&data, Some(&truth), policy)?.fit(name)?.beta_hat
        }
    };
    spectral_error(&beta_hat, &truth.beta_star)
}

/// Mean spectral-norm error of the target at each sample size in `n_list`.
pub fn decay_diagnostic(config: &DecayConfig) -> Result<Vec<DecayRow>> {
    if config.n_list.is_empty() || config.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Config("n list must be non-empty and strictly increasing".into()));
    }
    if config.replications == 0 {
        return Err(BenchError::Config("replications must be positive".into()));
    }
    for &n in &config.n_list {
        config.cell.with_n(n).validate()?;
    }
    let reps = config.replications;
    let jobs: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..reps).map(move |r| (n, r)))
        .collect();
    let outcomes: Vec<Result<f64>> = with_workers(config.workers, || {
        jobs.par_iter().map(|&(n, r)| one(config, n, r)).collect()
    })?;
    Ok(config
        .n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let chunk = &outcomes[i * reps..(i + 1) * reps];
            DecayRow {
                n,
                errors: chunk.iter().map(|o| o.as_ref().ok().copied()).collect(),
                failures: chunk.iter().map(|o| o.as_ref().err().map(|e| e.to_string())).collect(),
            }
        })
        .collect())
}
