//! Penalized plug-in estimators: column-wise lasso, L1- and L2-penalized
//! precision matrices, ridge and lasso forward regressions, and least squares.

mod lasso;
mod precision;

pub use lasso::{kkt_violation, lasso_column, GramLasso, LassoProblem, CHANGE_TOL, MAX_SWEEPS};
pub use precision::{
    glasso, glasso_kkt_residual, glasso_with, penalized_objective, ridge_precision, GlassoFit,
    GlassoSettings, PenaltyKind, PrecisionProblem,
};

use crate::error::{Error, Result};
use crate::matlin::{pseudo_inverse, Matrix, SymPosDef};
use crate::simgen::Dataset;

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidArgument(format!(
            "{what}: expected {want} penalties, got {got}"
        )));
    }
    Ok(())
}

/// Lasso of each column of `targets` on `design`, one penalty per column.
/// Returns a `design.ncols() × targets.ncols()` coefficient matrix.
pub fn lasso_columns(design: &Matrix, targets: &Matrix, lambdas: &[f64]) -> Result<Matrix> {
    check_len("lasso", lambdas.len(), targets.ncols())?;
    let gram = design.transpose() * design;
    let cross = design.transpose() * targets;
    let mut coef = Matrix::zeros(design.ncols(), targets.ncols());
    for (j, &lambda) in lambdas.iter().enumerate() {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lasso penalty {lambda} is negative")));
        }
        let solver = GramLasso::new(gram.clone(), cross.column(j).into_owned())?;
        coef.set_column(j, &solver.solve(lambda / 2.0, None)?);
    }
    Ok(coef)
}

/// Inverse-regression lasso: column `j` of `X` regressed on `Y` with penalty
/// `lambdas[j]`. Returns `η̂` as a `q × p` matrix.
pub fn eta_lasso(data: &Dataset, lambdas: &[f64]) -> Result<Matrix> {
    lasso_columns(&data.y_centered, &data.x_centered, lambdas)
}

/// Separate lassos of each response on `X`. Returns a `p × q` matrix.
pub fn lasso_forward(data: &Dataset, lambdas: &[f64]) -> Result<Matrix> {
    lasso_columns(&data.x_centered, &data.y_centered, lambdas)
}

/// Ridge penalty for the forward regression.
#[derive(Debug, Clone, PartialEq)]
pub enum RidgePenalty {
    /// One `λ` shared by every response.
    Shared(f64),
    /// A separate `λ_m` for each response.
    PerResponse(Vec<f64>),
}

impl RidgePenalty {
    fn for_response(&self, m: usize) -> f64 {
        match self {
            RidgePenalty::Shared(l) => *l,
            RidgePenalty::PerResponse(ls) => ls[m],
        }
    }
}

/// Column `m` solves `(XᵀX + λ_m I) β_m = XᵀY_m`.
pub fn ridge_ls(data: &Dataset, penalty: &RidgePenalty) -> Result<Matrix> {
    if let RidgePenalty::PerResponse(ls) = penalty {
        check_len("ridge", ls.len(), data.q())?;
    }
    let (p, q) = (data.p(), data.q());
    let gram = data.x_centered.transpose() * &data.x_centered;
    let cross = data.x_centered.transpose() * &data.y_centered;
    let mut beta = Matrix::zeros(p, q);
    for m in 0..q {
        let lambda = penalty.for_response(m);
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("ridge penalty {lambda} is negative")));
        }
        let system = &gram + Matrix::identity(p, p) * lambda;
        let spd = SymPosDef::new(system).map_err(|_| Error::Singular("XᵀX + λI"))?;
        beta.set_column(m, &spd.solve(&cross.columns(m, 1).into_owned()).column(0));
    }
    Ok(beta)
}

/// Least squares, or the minimum-norm solution `X⁺Y` when `X` is rank
/// deficient.
pub fn ols(data: &Dataset) -> Result<Matrix> {
    let x = &data.x_centered;
    if x.nrows() > x.ncols() {
        if let Ok(gram) = SymPosDef::new(x.transpose() * x) {
            return Ok(gram.solve(&(x.transpose() * &data.y_centered)));
        }
    }
    Ok(pseudo_inverse(x)? * &data.y_centered)
}

/// Sample-covariance helper: rows of `resid` are assumed centered.
pub fn residual_covariance(resid: &Matrix) -> Matrix {
    crate::matlin::cross_cov(resid)
}

#[cfg(test)]
mod tests;
