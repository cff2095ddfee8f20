//! CSV tables and JSON-lines sidecars.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::decay::DecayRow;
use crate::experiment::{cell_params, design_name, ExperimentReport, Summary};
use crate::holdout::HoldoutReport;
use crate::Result;

/// Seventeen significant digits; empty for NaN.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

const PARAM_COLUMNS: [&str; 9] = ["n", "p", "q", "rho_y", "rho_delta", "rho_x", "rho_e", "s_star", "r_star"];

fn summary_fields(s: &Summary, missing: usize) -> [String; 4] {
    [fmt_float(s.mean), fmt_float(s.se), s.count.to_string(), missing.to_string()]
}

/// One row per cell and estimator.
pub fn write_simulation_csv(report: &ExperimentReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["design"];
    header.extend(PARAM_COLUMNS);
    header.extend(["estimator", "mean", "se", "reps", "missing"]);
    w.write_record(&header)?;
    for r in &report.results {
        let params = cell_params(&r.cell);
        let mut row = vec![design_name(&r.cell).to_string()];
        for col in &PARAM_COLUMNS {
            let field = match params.iter().find(|(k, _)| k == col) {
                Some((k, v)) if matches!(*k, "n" | "p" | "q" | "r_star") => format!("{}", *v as usize),
                Some((_, v)) => fmt_float(*v),
                None => String::new(),
            };
            row.push(field);
        }
        row.push(r.estimator.as_str().to_string());
        row.extend(summary_fields(&r.summary(), r.missing()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Provenance line, then one line per cell and estimator with the
/// per-replication losses, failure reasons and tuning metadata.
pub fn write_simulation_jsonl(report: &ExperimentReport, mut out: impl Write) -> Result<()> {
    writeln!(out, "{}", json!({ "provenance": report.provenance }))?;
    for r in &report.results {
        let cell: Map<String, Value> = cell_params(&r.cell).into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let line = json!({
            "design": design_name(&r.cell),
            "cell": cell,
            "estimator": r.estimator.as_str(),
            "losses": r.losses,
            "failures": r.failures,
            "metadata": r.metadata,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// One row per estimator and response.
pub fn write_holdout_csv(report: &HoldoutReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "response", "mean", "se", "reps", "missing"])?;
    for r in &report.results {
        for (j, name) in report.responses.iter().enumerate() {
            let mut row = vec![r.estimator.as_str().to_string(), name.clone()];
            row.extend(summary_fields(&r.summary(j), r.missing()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_holdout_jsonl(report: &HoldoutReport, mut out: impl Write) -> Result<()> {
    let prov = json!({
        "provenance": {
            "config_hash": report.config_hash,
            "data_hash": report.data_hash,
            "test_rows": report.test_rows,
            "solver": report.solver,
            "version": env!("CARGO_PKG_VERSION"),
        }
    });
    writeln!(out, "{prov}")?;
    for r in &report.results {
        let line = json!({
            "estimator": r.estimator.as_str(),
            "responses": report.responses,
            "errors": r.errors,
            "failures": r.failures,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_decay_csv(rows: &[DecayRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "mean_spectral_error", "se", "reps", "missing"])?;
    for r in rows {
        let mut row = vec![r.n.to_string()];
        row.extend(summary_fields(&r.summary(), r.missing()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
