use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invreg_bench::config::{self, Settings};
use invreg_bench::decay::decay_diagnostic;
use invreg_bench::holdout::read_dataset_csv;
use invreg_bench::report::{
    write_decay_csv, write_holdout_csv, write_holdout_jsonl, write_simulation_csv, write_simulation_jsonl,
};
use invreg_bench::tables::table_config;
use invreg_bench::{run_holdout_study, run_simulation, BenchError, Result};

#[derive(Parser)]
#[command(name = "invreg-bench", version, about = "Replication studies for indirect multivariate regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more design cells and score estimators by model error.
    Simulate(SimulateArgs),
    /// Repeated random train/test splits of a CSV dataset.
    Holdout(HoldoutArgs),
    /// Mean spectral-norm error against the sample size.
    Decay(DecayArgs),
    /// Run every cell of one of the four simulation tables.
    ReproduceTable(TableArgs),
}

#[derive(Args)]
struct Common {
    /// key=value settings file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<String>,
    /// Comma-separated tuning grid replacing 10^-8, 10^-7.5, ..., 10^8.
    #[arg(long)]
    grid: Option<String>,
    /// Output CSV; a .jsonl sidecar is written next to it. Default: stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Design {
    /// sparse-inverse, rr-inverse or rr-forward.
    #[arg(long)]
    design: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    rho_y: Option<String>,
    #[arg(long)]
    rho_delta: Option<String>,
    #[arg(long)]
    rho_x: Option<String>,
    #[arg(long)]
    rho_e: Option<String>,
    #[arg(long)]
    s_star: Option<String>,
    #[arg(long)]
    r_star: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    design: Design,
    /// Comma-separated estimator names, e.g. I_L1,O,OLS_MP.
    #[arg(long)]
    estimators: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct HoldoutArgs {
    /// CSV with x_* predictor and y_* response columns.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    test_frac: Option<String>,
    #[arg(long)]
    estimators: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DecayArgs {
    #[command(flatten)]
    design: Design,
    /// Increasing sample sizes, e.g. 100,400,1600.
    #[arg(long)]
    n_list: Option<String>,
    /// Estimator name, or `population` for the true-parameter assembly.
    #[arg(long)]
    estimator: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TableArgs {
    /// 1, 2, 3 or 4.
    table: u8,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn settings(common: &Common, extra: Vec<(&str, Option<String>)>) -> Result<Settings> {
    let mut s = match &common.config {
        Some(path) => config::read_settings(path)?,
        None => Settings::new(),
    };
    let mut overrides = vec![
        ("reps", common.reps.clone()),
        ("seed", common.seed.clone()),
        ("workers", common.workers.clone()),
        ("grid", common.grid.clone()),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    overrides.extend(extra);
    config::merge(&mut s, overrides);
    Ok(s)
}

fn design_overrides(d: &Design) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("design", d.design.clone()),
        ("n", d.n.clone()),
        ("p", d.p.clone()),
        ("q", d.q.clone()),
        ("rho-y", d.rho_y.clone()),
        ("rho-delta", d.rho_delta.clone()),
        ("rho-x", d.rho_x.clone()),
        ("rho-e", d.rho_e.clone()),
        ("s-star", d.s_star.clone()),
        ("r-star", d.r_star.clone()),
    ]
}

/// Writes the CSV to `out` (or stdout) and the sidecar next to it.
fn emit(
    out: Option<&Path>,
    csv: impl FnOnce(&mut dyn Write) -> Result<()>,
    sidecar: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            csv(&mut f)?;
            f.flush()?;
            let mut side = BufWriter::new(File::create(path.with_extension("jsonl"))?);
            sidecar(&mut side)?;
            side.flush()?;
            eprintln!("wrote {} and {}", path.display(), path.with_extension("jsonl").display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            csv(&mut lock)?;
        }
    }
    Ok(())
}

fn out_path(s: &Settings) -> Option<PathBuf> {
    s.get("out").map(PathBuf::from)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let mut extra = design_overrides(&a.design);
            extra.push(("estimators", a.estimators.clone()));
            let s = settings(&a.common, extra)?;
            let cfg = config::simulation_config(&s)?;
            let report = run_simulation(&cfg)?;
            emit(
                out_path(&s).as_deref(),
                |w| write_simulation_csv(&report, w),
                |w| write_simulation_jsonl(&report, w),
            )
        }
        Command::Holdout(a) => {
            let s = settings(
                &a.common,
                vec![
                    ("data", a.data.as_ref().map(|p| p.display().to_string())),
                    ("test-frac", a.test_frac.clone()),
                    ("estimators", a.estimators.clone()),
                ],
            )?;
            let path = s
                .get("data")
                .ok_or_else(|| BenchError::Config("missing data".into()))?;
            let data = read_dataset_csv(Path::new(path))?;
            let cfg = config::holdout_config(&s)?;
            let report = run_holdout_study(&data, &cfg)?;
            emit(
                out_path(&s).as_deref(),
                |w| write_holdout_csv(&report, w),
                |w| write_holdout_jsonl(&report, w),
            )
        }
        Command::Decay(a) => {
            let mut extra = design_overrides(&a.design);
            extra.push(("n-list", a.n_list.clone()));
            extra.push(("estimator", a.estimator.clone()));
            let s = settings(&a.common, extra)?;
            let cfg = config::decay_config(&s)?;
            let rows = decay_diagnostic(&cfg)?;
            match out_path(&s) {
                Some(path) => {
                    let mut f = BufWriter::new(File::create(&path)?);
                    write_decay_csv(&rows, &mut f)?;
                    f.flush()?;
                    Ok(())
                }
                None => write_decay_csv(&rows, io::stdout().lock()),
            }
        }
        Command::ReproduceTable(a) => {
            let mut cfg = table_config(a.table)?;
            cfg.replications = a.reps;
            cfg.base_seed = a.seed;
            cfg.workers = a.workers;
            let report = run_simulation(&cfg)?;
            emit(
                a.out.as_deref(),
                |w| write_simulation_csv(&report, w),
                |w| write_simulation_jsonl(&report, w),
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
