//! Loss functions.

use invreg_core::indirect::BetaEstimate;
use invreg_core::matlin::{spd_sqrt, spectral_norm, Matrix, Vector};
use invreg_core::simgen::JointGroundTruth;
use invreg_core::Error;

use crate::Result;

fn check_shape(got: &Matrix, want: (usize, usize)) -> Result<()> {
    if got.shape() != want {
        return Err(Error::ShapeMismatch {
            expected: want,
            got: got.shape(),
        }
        .into());
    }
    Ok(())
}

/// Scores coefficient matrices against one ground truth, reusing `Σ_XX^{1/2}`.
#[derive(Debug, Clone)]
pub struct ModelErrorScorer {
    root: Matrix,
    beta_star: Matrix,
}

impl ModelErrorScorer {
    pub fn new(truth: &JointGroundTruth) -> Result<Self> {
        Ok(Self {
            root: spd_sqrt(&truth.sigma_xx_star)?.into_matrix(),
            beta_star: truth.beta_star.clone(),
        })
    }

    /// `‖Σ_XX^{1/2}(β̂ − β*)‖_F²`.
    pub fn score(&self, beta_hat: &Matrix) -> Result<f64> {
        check_shape(beta_hat, self.beta_star.shape())?;
        Ok((&self.root * (beta_hat - &self.beta_star)).norm_squared())
    }
}

/// Model error `‖Σ_XX^{1/2}(β̂ − β*)‖_F²`.
pub fn model_error(beta_hat: &Matrix, truth: &JointGroundTruth) -> Result<f64> {
    ModelErrorScorer::new(truth)?.score(beta_hat)
}

/// Spectral-norm error `‖β̂ − β*‖₂`.
pub fn spectral_error(beta_hat: &Matrix, beta_star: &Matrix) -> Result<f64> {
    check_shape(beta_hat, beta_star.shape())?;
    Ok(spectral_norm(&(beta_hat - beta_star))?)
}

/// Per-response sum over test rows of `(y − μ̂ − β̂ᵀx)²`.
pub fn prediction_error(estimate: &BetaEstimate, test_x: &Matrix, test_y: &Matrix) -> Result<Vector> {
    let (p, q) = estimate.beta_hat.shape();
    check_shape(test_x, (test_x.nrows(), p))?;
    check_shape(test_y, (test_x.nrows(), q))?;
    let resid = test_y - estimate.predict(test_x)?;
    Ok(Vector::from_iterator(q, resid.column_iter().map(|c| c.norm_squared())))
}
