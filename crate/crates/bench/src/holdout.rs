//! Random train/test splits of a real dataset.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use invreg_core::indirect::{EstimatorName, Fitter, TuningPolicy};
use invreg_core::matlin::Matrix;
use invreg_core::simgen::{center, rng_from_seed};
use invreg_core::tuning::Grid;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::experiment::{replication_seed, sha256_hex, solver_description, summarize, with_workers, Summary};
use crate::metrics::prediction_error;
use crate::{BenchError, Result};

/// Fewest rows a holdout study accepts.
pub const MIN_ROWS: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.4;
pub const DEFAULT_HOLDOUT_REPLICATIONS: usize = 500;

/// Raw (uncentered) predictors and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutData {
    pub x: Matrix,
    pub y: Matrix,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
}

impl HoldoutData {
    pub fn new(x: Matrix, y: Matrix, x_names: Vec<String>, y_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.nrows() || x_names.len() != x.ncols() || y_names.len() != y.ncols() {
            return Err(BenchError::Parse(format!(
                "inconsistent dataset: x {:?} with {} names, y {:?} with {} names",
                x.shape(),
                x_names.len(),
                y.shape(),
                y_names.len()
            )));
        }
        Ok(Self { x, y, x_names, y_names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// SHA-256 of the little-endian bytes of `x` then `y`.
    pub fn hash(&self) -> String {
        let bytes: Vec<u8> = self
            .x
            .iter()
            .chain(self.y.iter())
            .flat_map(|v| v.to_le_bytes())
            .collect();
        sha256_hex(&bytes)
    }
}

/// Reads a comma-separated file with a header row. Columns named `x_*` are
/// predictors, `y_*` responses; any other column is ignored.
pub fn parse_dataset_csv(reader: impl Read) -> Result<HoldoutData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut x_cols = Vec::new();
    let mut y_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if h.starts_with("x_") {
            x_cols.push(i);
        } else if h.starts_with("y_") {
            y_cols.push(i);
        }
    }
    if x_cols.is_empty() || y_cols.is_empty() {
        return Err(BenchError::Parse(
            "header needs at least one x_ column and one y_ column".into(),
        ));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    BenchError::Parse(format!("data row {}: column {} has value {raw:?}", line + 1, &headers[i]))
                })
        };
        for &i in &x_cols {
            xs.push(field(i)?);
        }
        for &i in &y_cols {
            ys.push(field(i)?);
        }
        rows += 1;
    }
    let names = |cols: &[usize]| cols.iter().map(|&i| headers[i].to_string()).collect();
    HoldoutData::new(
        Matrix::from_row_slice(rows, x_cols.len(), &xs),
        Matrix::from_row_slice(rows, y_cols.len(), &ys),
        names(&x_cols),
        names(&y_cols),
    )
}

pub fn read_dataset_csv(path: &Path) -> Result<HoldoutData> {
    let file = std::fs::File::open(path)?;
    parse_dataset_csv(std::io::BufReader::new(file))
}

/// Sorted training and test row indices for one random split.
pub fn split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(BenchError::Config(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n - n_test.min(n) < 2 {
        return Err(BenchError::Config(format!(
            "test fraction {test_fraction} leaves no usable split of {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct HoldoutConfig {
    pub test_fraction: f64,
    pub replications: usize,
    pub estimators: Vec<EstimatorName>,
    pub seed: u64,
    pub grid: Option<Grid>,
    pub workers: usize,
}

impl HoldoutConfig {
    pub fn new(estimators: Vec<EstimatorName>) -> Self {
        Self {
            test_fraction: DEFAULT_TEST_FRACTION,
            replications: DEFAULT_HOLDOUT_REPLICATIONS,
            estimators,
            seed: 0,
            grid: None,
            workers: 0,
        }
    }

    pub fn canonical(&self, data_hash: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "data {data_hash}");
        let _ = writeln!(s, "test_fraction {:e}", self.test_fraction);
        let names: Vec<&str> = self.estimators.iter().map(|e| e.as_str()).collect();
        let _ = writeln!(s, "estimators {}", names.join(","));
        let _ = writeln!(s, "replications {}", self.replications);
        let _ = writeln!(s, "seed {}", self.seed);
        let values: Vec<String> = self
            .grid
            .clone()
            .unwrap_or_default()
            .values()
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        let _ = writeln!(s, "grid {}", values.join(","));
        s
    }
}

/// Per-replication test errors of one estimator.
#[derive(Debug, Clone)]
pub struct HoldoutResult {
    pub estimator: EstimatorName,
    /// Per response: summed squared test error divided by the number of test
    /// rows. `None` where the fit failed.
    pub errors: Vec<Option<Vec<f64>>>,
    pub failures: Vec<Option<String>>,
}

impl HoldoutResult {
    pub fn summary(&self, response: usize) -> Summary {
        let values: Vec<f64> = self.errors.iter().flatten().map(|e| e[response]).collect();
        summarize(&values)
    }

    /// Per-replication error summed over responses.
    pub fn totals(&self) -> Vec<Option<f64>> {
        self.errors.iter().map(|e| e.as_ref().map(|v| v.iter().sum())).collect()
    }

    pub fn missing(&self) -> usize {
        self.errors.iter().filter(|e| e.is_none()).count()
    }
}

#[derive(Debug, Clone)]
pub struct HoldoutReport {
    pub responses: Vec<String>,
    pub test_rows: usize,
    pub results: Vec<HoldoutResult>,
    pub config_hash: String,
    pub data_hash: String,
    pub solver: String,
}

impl HoldoutReport {
    pub fn get(&self, estimator: EstimatorName) -> Option<&HoldoutResult> {
        self.results.iter().find(|r| r.estimator == estimator)
    }
}

/// Repeatedly splits `data`, fits each estimator on the training rows and
/// scores it on the test rows.
pub fn run_holdout_study(data: &HoldoutData, config: &HoldoutConfig) -> Result<HoldoutReport> {
    let n = data.n();
    if n < MIN_ROWS {
        return Err(BenchError::TooFewRows { got: n, min: MIN_ROWS });
    }
    if config.replications == 0 || config.estimators.is_empty() {
        return Err(BenchError::Config("need at least one replication and one estimator".into()));
    }
    if let Some(o) = config.estimators.iter().find(|e| e.is_oracle()) {
        return Err(BenchError::Config(format!("{o} needs generating parameters, which real data lack")));
    }
    let test_rows = split(n, config.test_fraction, config.seed)?.1.len();
    let q = data.y.ncols();

    type Outcome = std::result::Result<Vec<f64>, String>;
    let per_rep: Vec<Vec<Outcome>> = with_workers(config.workers, || {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(config.seed, rep);
                let k = config.estimators.len();
                let run = || -> Result<Vec<Outcome>> {
                    let (train, test) = split(n, config.test_fraction, seed)?;
                    let fit_data = center(&data.x.select_rows(&train), &data.y.select_rows(&train))?;
                    let test_x = data.x.select_rows(&test);
                    let test_y = data.y.select_rows(&test);
                    let policy = TuningPolicy {
                        grid: config.grid.clone().unwrap_or_default(),
                        fold_seed: seed,
                        ..TuningPolicy::default()
                    };
                    let fitter = Fitter::new(&fit_data, None, policy)?;
                    Ok(config
                        .estimators
                        .iter()
                        .map(|&name| {
                            fitter
                                .fit(name)
                                .map_err(BenchError::from)
                                .and_then(|est| prediction_error(&est, &test_x, &test_y))
                                .map(|e| e.iter().map(|v| v / test.len() as f64).collect())
                                .map_err(|e| e.to_string())
                        })
                        .collect())
                };
                run().unwrap_or_else(|e| vec![Err(e.to_string()); k])
            })
            .collect()
    })?;

    let results = config
        .estimators
        .iter()
        .enumerate()
        .map(|(e, &estimator)| {
            let mut r = HoldoutResult {
                estimator,
                errors: Vec::with_capacity(config.replications),
                failures: Vec::with_capacity(config.replications),
            };
            for rep in &per_rep {
                match &rep[e] {
                    Ok(v) => {
                        debug_assert_eq!(v.len(), q);
                        r.errors.push(Some(v.clone()));
                        r.failures.push(None);
                    }
                    Err(msg) => {
                        r.errors.push(None);
                        r.failures.push(Some(msg.clone()));
                    }
                }
            }
            r
        })
        .collect();
    let data_hash = data.hash();
    Ok(HoldoutReport {
        responses: data.y_names.clone(),
        test_rows,
        results,
        config_hash: sha256_hex(config.canonical(&data_hash).as_bytes()),
        data_hash,
        solver: solver_description(),
    })
}
