use std::process::Command;

use invreg_bench::config::{decay_config, merge, parse_settings, simulation_config};
use invreg_bench::decay::{decay_diagnostic, DecayConfig, DecayTarget};
use invreg_bench::experiment::{replication_seed, summarize, ExperimentConfig};
use invreg_bench::holdout::{parse_dataset_csv, run_holdout_study, split, HoldoutConfig, HoldoutData};
use invreg_bench::metrics::{model_error, prediction_error, spectral_error};
use invreg_bench::report::write_simulation_csv;
use invreg_bench::tables::{
    sparse_cell, table_cells, table_config, table_estimators, rr_inverse_cell, RR_FORWARD_ROWS,
    RR_INVERSE_ROWS, SPARSE_ROWS, TABLES,
};
use invreg_bench::{run_simulation, BenchError};
use invreg_core::indirect::{BetaEstimate, EstimatorName, FitMetadata};
use invreg_core::matlin::{JointCovariance, Matrix, SymPosDef, Vector};
use invreg_core::oracles::{gaussian, rng};
use invreg_core::simgen::JointGroundTruth;
use proptest::prelude::*;

fn names(list: &[&str]) -> Vec<EstimatorName> {
    list.iter().map(|s| s.parse().unwrap()).collect()
}

fn normal(rows: usize, cols: usize, seed: u64) -> Matrix {
    gaussian(rows, cols, &mut rng(seed))
}

fn truth_with_sigma_xx(sigma_xx: Matrix, q: usize) -> JointGroundTruth {
    let p = sigma_xx.nrows();
    let sigma = Matrix::from_fn(p + q, p + q, |i, j| match (i < p, j < p) {
        (true, true) => sigma_xx[(i, j)],
        (false, false) if i == j => 1.0,
        _ => 0.0,
    });
    let jc = JointCovariance::new(SymPosDef::new(sigma).unwrap(), p).unwrap();
    JointGroundTruth::from_joint(&jc).unwrap()
}

fn estimate(beta: Matrix, intercept: Vector) -> BetaEstimate {
    BetaEstimate {
        name: "OLS_MP".parse().unwrap(),
        beta_hat: beta,
        intercept_hat: intercept,
        metadata: FitMetadata::default(),
    }
}

fn small_config(estimators: &[&str], reps: usize) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(vec![sparse_cell(30, 4, 3, (0.5, 0.5, 0.3))], names(estimators));
    config.replications = reps;
    config.base_seed = 5;
    config
}

#[test]
fn model_error_of_truth_is_zero() {
    let truth = truth_with_sigma_xx(Matrix::identity(3, 3), 2);
    assert!(model_error(&truth.beta_star, &truth).unwrap().abs() < 1e-15);
    let off = &truth.beta_star + normal(3, 2, 1);
    assert!((model_error(&off, &truth).unwrap() - normal(3, 2, 1).norm_squared()).abs() < 1e-12);
    assert!(spectral_error(&truth.beta_star, &truth.beta_star).unwrap() < 1e-15);
}

#[test]
fn model_error_matches_trace_form() {
    let a = normal(4, 4, 2);
    let sxx = &a * a.transpose() + Matrix::identity(4, 4);
    let truth = truth_with_sigma_xx(sxx.clone(), 3);
    let beta = normal(4, 3, 3);
    let d = &beta - &truth.beta_star;
    let trace = (d.transpose() * &sxx * &d).trace();
    assert!((model_error(&beta, &truth).unwrap() - trace).abs() < 1e-10 * trace.max(1.0));
}

#[test]
fn model_error_rejects_wrong_shape() {
    let truth = truth_with_sigma_xx(Matrix::identity(3, 3), 2);
    assert!(model_error(&Matrix::zeros(2, 3), &truth).is_err());
}

#[test]
fn prediction_error_sums_squared_residuals() {
    let beta = normal(3, 2, 4);
    let x = normal(6, 3, 5);
    let mu = Vector::from_vec(vec![1.5, -2.0]);
    let mut y = &x * &beta;
    for mut row in y.row_iter_mut() {
        row += mu.transpose();
    }
    let perfect = prediction_error(&estimate(beta.clone(), mu.clone()), &x, &y).unwrap();
    assert!(perfect.amax() < 1e-20);

    let zero = prediction_error(&estimate(Matrix::zeros(3, 2), mu.clone()), &x, &y).unwrap();
    let fitted = &x * &beta;
    for j in 0..2 {
        assert!((zero[j] - fitted.column(j).norm_squared()).abs() < 1e-12);
    }

    let x2 = Matrix::from_fn(12, 3, |i, j| x[(i % 6, j)]);
    let y2 = Matrix::from_fn(12, 2, |i, j| y[(i % 6, j)] + 0.3);
    let single = prediction_error(&estimate(beta.clone(), mu.clone()), &x, &y.add_scalar(0.3)).unwrap();
    let double = prediction_error(&estimate(beta, mu), &x2, &y2).unwrap();
    assert!((double - single * 2.0).amax() < 1e-12);
}

proptest! {
    #[test]
    fn summary_se_is_sample_sd_over_root_n(values in prop::collection::vec(-100.0f64..100.0, 2..40)) {
        let s = summarize(&values);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        prop_assert!((s.mean - mean).abs() < 1e-12);
        prop_assert!((s.se - (var / n).sqrt()).abs() < 1e-12);
        prop_assert_eq!(s.count, values.len());
    }

    #[test]
    fn split_partitions_rows(n in 10usize..60, frac in 0.1f64..0.8, seed in any::<u64>()) {
        let (train, test) = split(n, frac, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!train.is_empty() && !test.is_empty());
        prop_assert_eq!((train.clone(), test.clone()), split(n, frac, seed).unwrap());
    }

    #[test]
    fn replication_seeds_are_distinct(base in any::<u64>(), a in 0usize..1000, b in 0usize..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(replication_seed(base, a), replication_seed(base, b));
    }
}

#[test]
fn summary_edge_cases() {
    assert!(summarize(&[]).mean.is_nan());
    let one = summarize(&[3.0]);
    assert_eq!(one.mean, 3.0);
    assert!(one.se.is_nan());
}

#[test]
fn simulation_is_deterministic_and_worker_independent() {
    let mut a = small_config(&["I_L1", "OLS_MP", "R"], 4);
    a.workers = 1;
    let mut b = a.clone();
    b.workers = 3;
    let ra = run_simulation(&a).unwrap();
    let rb = run_simulation(&b).unwrap();
    for (x, y) in ra.results.iter().zip(&rb.results) {
        assert_eq!(x.losses, y.losses);
        assert_eq!(x.losses.len(), 4);
    }
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_simulation_csv(&ra, &mut ca).unwrap();
    write_simulation_csv(&rb, &mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(ra.provenance.config_hash, rb.provenance.config_hash);
}

#[test]
fn csv_summary_recomputes_from_losses() {
    let report = run_simulation(&small_config(&["OLS_MP", "O"], 5)).unwrap();
    let mut buf = Vec::new();
    write_simulation_csv(&report, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let header = rdr.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    for (record, result) in rdr.records().zip(&report.results) {
        let record = record.unwrap();
        let losses = result.present();
        let s = summarize(&losses);
        let mean: f64 = record[col("mean")].parse().unwrap();
        let se: f64 = record[col("se")].parse().unwrap();
        assert!((mean - s.mean).abs() <= 1e-12 * s.mean.abs().max(1.0));
        assert!((se - s.se).abs() <= 1e-12 * s.se.abs().max(1.0));
        assert_eq!(&record[col("reps")], "5");
        assert_eq!(&record[col("estimator")], result.estimator.to_string());
    }
}

#[test]
fn failing_fits_are_recorded_as_missing() {
    let mut config = ExperimentConfig::new(
        vec![sparse_cell(8, 10, 3, (0.5, 0.5, 0.3)), rr_inverse_cell(8, 10, 3, (0.5, 0.5, 2))],
        names(&["I_S", "RR"]),
    );
    config.replications = 3;
    let report = run_simulation(&config).unwrap();
    for result in &report.results {
        assert_eq!(result.losses.len(), 3);
        assert_eq!(result.missing(), 3, "{} should fail at n < p", result.estimator);
        assert_eq!(result.failures.iter().flatten().count(), 3);
    }
}

#[test]
fn configuration_rejects_bad_values() {
    assert!(run_simulation(&small_config(&[], 3)).is_err());
    assert!(run_simulation(&small_config(&["OLS_MP"], 0)).is_err());
    assert!(table_cells(5).is_err());
    assert!(table_estimators(0).is_err());
}

#[test]
fn table_cells_are_valid() {
    let expected = [SPARSE_ROWS.len(), SPARSE_ROWS.len(), RR_INVERSE_ROWS.len(), RR_FORWARD_ROWS.len()];
    assert_eq!(expected, [10, 10, 11, 11]);
    for (t, count) in TABLES.into_iter().zip(expected) {
        let cells = table_cells(t).unwrap();
        assert_eq!(cells.len(), count);
        for cell in &cells {
            cell.validate().unwrap();
        }
        let config = table_config(t).unwrap();
        assert_eq!(config.replications, 50);
        config.validate().unwrap();
    }
    assert_eq!(table_cells(2).unwrap()[0].dims(), (50, 60, 60));
    assert_eq!(table_cells(1).unwrap()[0].dims(), (100, 20, 20));
    assert!(!table_estimators(2).unwrap().contains(&"I_S".parse().unwrap()));
}

#[test]
fn settings_parse_with_comments_and_overrides() {
    let text = "# a simulation\ndesign = sparse-inverse\nn=40\np = 5\nq=4\nrho_y=0.5,0.7\nrho-delta=0.5\ns-star=0.1 # sparse\nestimators=I_L1,OLS_MP\nreps=7\n";
    let mut s = parse_settings(text).unwrap();
    let config = simulation_config(&s).unwrap();
    assert_eq!(config.cells.len(), 2);
    assert_eq!(config.replications, 7);
    merge(&mut s, [("reps", Some("3".to_string())), ("seed", None)]);
    assert_eq!(simulation_config(&s).unwrap().replications, 3);
}

#[test]
fn settings_errors() {
    assert!(matches!(parse_settings("bogus=1"), Err(BenchError::Parse(_))));
    assert!(parse_settings("no equals sign").is_err());
    let foreign = parse_settings("design=rr-forward\nn=30\np=4\nq=3\nrho-x=0.5\nrho-e=0.5\nr-star=1\ns-star=0.2\nestimators=RR").unwrap();
    assert!(simulation_config(&foreign).is_err());
    let missing = parse_settings("design=sparse-inverse\nn=30\np=4\nestimators=RR").unwrap();
    assert!(simulation_config(&missing).is_err());
    let two = parse_settings("design=sparse-inverse\nn-list=30,60\np=4\nq=3\nrho-y=0.5,0.7\nrho-delta=0.5\ns-star=0.2\nestimator=I_L1").unwrap();
    assert!(decay_config(&two).is_err());
    let pop = parse_settings("design=sparse-inverse\nn-list=30,60\np=4\nq=3\nrho-y=0.5\nrho-delta=0.5\ns-star=0.2\nestimator=population").unwrap();
    assert_eq!(decay_config(&pop).unwrap().target, DecayTarget::Population);
}

#[test]
fn dataset_csv_parsing() {
    let mut text = String::from("id,x_a,x_b,y_a\n");
    for i in 0..12 {
        text.push_str(&format!("{i},{},{},{}\n", i as f64, (i * i) as f64, 1.0 + i as f64));
    }
    let data = parse_dataset_csv(text.as_bytes()).unwrap();
    assert_eq!((data.n(), data.x.ncols(), data.y.ncols()), (12, 2, 1));
    assert_eq!(data.x_names, vec!["x_a", "x_b"]);

    assert!(matches!(parse_dataset_csv("a,b\n1,2\n".as_bytes()), Err(BenchError::Parse(_))));
    assert!(matches!(parse_dataset_csv("x_a,y_a\n1,oops\n".as_bytes()), Err(BenchError::Parse(_))));
    assert!(parse_dataset_csv("x_a,y_a\n1,2,3\n".as_bytes()).is_err());
}

fn linear_data(n: usize) -> HoldoutData {
    let x = normal(n, 3, 9).add_scalar(5.0);
    let y = (&x * normal(3, 2, 10)).add_scalar(2.0);
    HoldoutData::new(x, y, vec!["x_1".into(), "x_2".into(), "x_3".into()], vec!["y_1".into(), "y_2".into()]).unwrap()
}

#[test]
fn holdout_on_exact_linear_data_has_no_error() {
    let mut config = HoldoutConfig::new(names(&["OLS_MP"]));
    config.replications = 5;
    let report = run_holdout_study(&linear_data(25), &config).unwrap();
    assert_eq!(report.test_rows, 10);
    let result = report.get("OLS_MP".parse().unwrap()).unwrap();
    for total in result.totals() {
        assert!(total.unwrap() < 1e-18);
    }
}

#[test]
fn holdout_rejects_small_data_and_oracles() {
    let config = HoldoutConfig::new(names(&["OLS_MP"]));
    assert!(matches!(
        run_holdout_study(&linear_data(9), &config),
        Err(BenchError::TooFewRows { got: 9, min: 10 })
    ));
    let oracle = HoldoutConfig::new(names(&["O"]));
    assert!(run_holdout_study(&linear_data(25), &oracle).is_err());
}

#[test]
fn holdout_split_is_deterministic() {
    assert_eq!(split(25, 0.4, 3).unwrap(), split(25, 0.4, 3).unwrap());
    assert_ne!(split(25, 0.4, 3).unwrap(), split(25, 0.4, 4).unwrap());
    assert_eq!(split(25, 0.4, 3).unwrap().1.len(), 10);
}

fn decay(target: DecayTarget, n_list: Vec<usize>) -> DecayConfig {
    DecayConfig {
        cell: sparse_cell(40, 4, 3, (0.5, 0.5, 0.3)),
        n_list,
        target,
        replications: 3,
        base_seed: 1,
        grid: None,
        workers: 1,
    }
}

#[test]
fn decay_with_population_plugins_is_exact() {
    let rows = decay_diagnostic(&decay(DecayTarget::Population, vec![30, 90])).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert!(row.summary().mean < 1e-10);
    }
    let single = decay_diagnostic(&decay("OLS_MP".parse().map(DecayTarget::Estimator).unwrap(), vec![50])).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].n, 50);
    assert!(decay_diagnostic(&decay(DecayTarget::Population, vec![90, 30])).is_err());
    assert!(decay_diagnostic(&decay(DecayTarget::Population, vec![])).is_err());
}

#[test]
fn cli_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "design=sparse-inverse\nn=30\np=4\nq=3\nrho-y=0.5\nrho-delta=0.5\ns-star=0.2,0.4\nestimators=OLS_MP,R\nreps=9\n",
    )
    .unwrap();
    let out = dir.path().join("sim.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_invreg-bench"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--reps", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[0].starts_with("design,n,p,q"));
    assert!(lines[1..].iter().all(|l| l.split(',').nth(13) == Some("2")));
    assert!(out.with_extension("jsonl").exists());

    let bad = Command::new(env!("CARGO_BIN_EXE_invreg-bench"))
        .args(["reproduce-table", "9"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
