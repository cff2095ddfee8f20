//! Parameter grids of the four simulation tables.

use invreg_core::indirect::EstimatorName;
use invreg_core::simgen::{
    ModelSpec, ReducedRankForwardModelSpec, ReducedRankInverseModelSpec, SparseInverseModelSpec,
};

use crate::experiment::ExperimentConfig;
use crate::{BenchError, Result};

pub const TABLES: [u8; 4] = [1, 2, 3, 4];

/// `(ρ_Y, ρ_Δ, s*)` rows shared by tables 1 and 2.
pub const SPARSE_ROWS: [(f64, f64, f64); 10] = [
    (0.7, 0.0, 0.1),
    (0.7, 0.5, 0.1),
    (0.7, 0.7, 0.1),
    (0.7, 0.9, 0.1),
    (0.0, 0.9, 0.1),
    (0.5, 0.9, 0.1),
    (0.9, 0.9, 0.1),
    (0.7, 0.9, 0.3),
    (0.7, 0.9, 0.5),
    (0.7, 0.9, 0.7),
];

/// `(ρ_Y, ρ_Δ, r*)` rows of table 3.
pub const RR_INVERSE_ROWS: [(f64, f64, usize); 11] = [
    (0.7, 0.0, 10),
    (0.7, 0.5, 10),
    (0.7, 0.7, 10),
    (0.7, 0.9, 10),
    (0.0, 0.9, 10),
    (0.5, 0.9, 10),
    (0.9, 0.9, 10),
    (0.7, 0.9, 4),
    (0.7, 0.9, 8),
    (0.7, 0.9, 12),
    (0.7, 0.9, 16),
];

/// `(ρ_X, ρ_E, r*)` rows of table 4.
pub const RR_FORWARD_ROWS: [(f64, f64, usize); 11] = [
    (0.0, 0.9, 10),
    (0.5, 0.9, 10),
    (0.7, 0.9, 10),
    (0.9, 0.9, 10),
    (0.7, 0.0, 10),
    (0.7, 0.5, 10),
    (0.7, 0.7, 10),
    (0.7, 0.9, 4),
    (0.7, 0.9, 8),
    (0.7, 0.9, 12),
    (0.7, 0.9, 16),
];

pub fn sparse_cell(n: usize, p: usize, q: usize, (rho_y, rho_delta, s_star): (f64, f64, f64)) -> ModelSpec {
    ModelSpec::SparseInverse(SparseInverseModelSpec {
        n,
        p,
        q,
        rho_y,
        rho_delta,
        s_star,
        seed: 0,
    })
}

pub fn rr_inverse_cell(n: usize, p: usize, q: usize, (rho_y, rho_delta, r_star): (f64, f64, usize)) -> ModelSpec {
    ModelSpec::ReducedRankInverse(ReducedRankInverseModelSpec {
        n,
        p,
        q,
        rho_y,
        rho_delta,
        r_star,
        seed: 0,
    })
}

pub fn rr_forward_cell(n: usize, p: usize, q: usize, (rho_x, rho_e, r_star): (f64, f64, usize)) -> ModelSpec {
    ModelSpec::ReducedRankForward(ReducedRankForwardModelSpec {
        n,
        p,
        q,
        rho_x,
        rho_e,
        r_star,
        seed: 0,
    })
}

fn names(list: &[&str]) -> Vec<EstimatorName> {
    list.iter().map(|s| s.parse().expect("built-in estimator name")).collect()
}

pub fn table_cells(table: u8) -> Result<Vec<ModelSpec>> {
    Ok(match table {
        1 => SPARSE_ROWS.iter().map(|&r| sparse_cell(100, 20, 20, r)).collect(),
        2 => SPARSE_ROWS.iter().map(|&r| sparse_cell(50, 60, 60, r)).collect(),
        3 => RR_INVERSE_ROWS.iter().map(|&r| rr_inverse_cell(100, 20, 20, r)).collect(),
        4 => RR_FORWARD_ROWS.iter().map(|&r| rr_forward_cell(100, 20, 20, r)).collect(),
        t => return Err(BenchError::Config(format!("no table {t}; expected 1-4"))),
    })
}

pub fn table_estimators(table: u8) -> Result<Vec<EstimatorName>> {
    Ok(match table {
        1 => names(&["I_L1", "O", "O_delta", "O_Y", "I_S", "OLS_MP", "L2", "R"]),
        2 => names(&["I_L1", "O", "O_delta", "O_Y", "OLS_MP", "L2", "R"]),
        3 | 4 => names(&["I_r", "O_r", "O_delta_r", "O_Y_r", "I_ML_r", "OLS_MP", "RR"]),
        t => return Err(BenchError::Config(format!("no table {t}; expected 1-4"))),
    })
}

/// Every cell and estimator of one table.
pub fn table_config(table: u8) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::new(table_cells(table)?, table_estimators(table)?))
}
