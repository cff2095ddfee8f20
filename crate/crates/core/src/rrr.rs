//! Gaussian-likelihood reduced-rank regression.
//!
//! Minimizes `n⁻¹ tr{(R − DC)ᵀ(R − DC) Ω} − log det Ω` jointly over `Ω` and
//! coefficient matrices `C` of rank `r`. With the OLS residual covariance `Σ̂`
//! as weight the minimizer is
//!
//! ```text
//! C = B_ols Σ̂^{-1/2} V_r V_rᵀ Σ̂^{1/2}
//! ```
//!
//! where `V_r` holds the top `r` eigenvectors of
//! `Σ̂^{-1/2} (Rᵀ D B_ols) Σ̂^{-1/2}`.

use crate::error::{Error, Result};
use crate::matlin::{cross_cov, spd_sqrt, sym_eigen, Matrix, SymPosDef};
use crate::simgen::Dataset;

#[derive(Debug, Clone)]
pub struct RrrFit {
    /// `a × b` coefficients of rank `rank`.
    pub coef: Matrix,
    /// Error precision that is jointly optimal with `coef`.
    pub precision: SymPosDef,
    pub rank: usize,
    /// `b + log det Σ_r`, the minimized objective.
    pub objective: f64,
}

/// Everything rank-independent, so that a full rank path costs one OLS fit
/// and one eigendecomposition.
#[derive(Debug, Clone)]
pub struct RrrPath {
    design: Matrix,
    response: Matrix,
    b_ols: Matrix,
    /// `Σ̂^{1/2}` of the OLS residual covariance.
    root: Matrix,
    /// `Σ̂^{-1/2}`.
    inv_root: Matrix,
    /// Eigenvectors of the whitened fitted covariance, descending.
    vectors: Matrix,
}

impl RrrPath {
    pub fn new(design: &Matrix, response: &Matrix) -> Result<Self> {
        let (n, a) = design.shape();
        let b = response.ncols();
        if response.nrows() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, b),
                got: response.shape(),
            });
        }
        if n <= a.max(b) {
            return Err(Error::Singular("reduced-rank regression needs n > max(a, b)"));
        }
        let gram = SymPosDef::new(design.transpose() * design).map_err(|_| Error::Singular("DᵀD"))?;
        let cross = design.transpose() * response;
        let b_ols = gram.solve(&cross);
        let resid = response - design * &b_ols;
        let sigma = SymPosDef::new(cross_cov(&resid))
            .map_err(|_| Error::Singular("OLS residual covariance"))?;
        let root = spd_sqrt(&sigma)?;
        let inv_root = root.inverse().map_err(|_| Error::Singular("OLS residual covariance"))?;
        let fitted = cross.transpose() * &b_ols;
        let whitened = inv_root.matrix() * fitted * inv_root.matrix();
        let vectors = sym_eigen(&crate::matlin::symmetrize(&whitened))?.vectors;
        Ok(Self {
            design: design.clone(),
            response: response.clone(),
            b_ols,
            root: root.into_matrix(),
            inv_root: inv_root.into_matrix(),
            vectors,
        })
    }

    pub fn max_rank(&self) -> usize {
        self.design.ncols().min(self.response.ncols())
    }

    /// Rank-`r` coefficient matrix.
    pub fn coef(&self, r: usize) -> Result<Matrix> {
        let max = self.max_rank();
        if r > max {
            return Err(Error::RankTooLarge { rank: r, max });
        }
        let (a, b) = (self.design.ncols(), self.response.ncols());
        if r == 0 {
            return Ok(Matrix::zeros(a, b));
        }
        let v = self.vectors.columns(0, r);
        let proj = &v * v.transpose();
        // Whiten the fitted values, project onto the leading directions, unwhiten.
        Ok(&self.b_ols * &self.inv_root * proj * &self.root)
    }

    pub fn fit(&self, r: usize) -> Result<RrrFit> {
        let coef = self.coef(r)?;
        let resid = &self.response - &self.design * &coef;
        let cov = SymPosDef::new(cross_cov(&resid))
            .map_err(|_| Error::Singular("rank-r residual covariance"))?;
        let objective = self.response.ncols() as f64 + cov.log_det();
        let precision = cov.inverse().map_err(|_| Error::Singular("rank-r residual covariance"))?;
        Ok(RrrFit {
            coef,
            precision,
            rank: r,
            objective,
        })
    }
}

/// Reduced-rank regression of `response` (n×b) on `design` (n×a). Both are
/// assumed column-centered.
pub fn rrr_fit(design: &Matrix, response: &Matrix, r: usize) -> Result<RrrFit> {
    let max = design.ncols().min(response.ncols());
    if r > max {
        return Err(Error::RankTooLarge { rank: r, max });
    }
    RrrPath::new(design, response)?.fit(r)
}

/// `X` on `Y`: `coef` is `η̂` (q×p) and `precision` is `Δ̂⁻¹`.
pub fn rrr_inverse(data: &Dataset, r: usize) -> Result<RrrFit> {
    rrr_fit(&data.y_centered, &data.x_centered, r)
}

/// `Y` on `X`: `coef` is `β̂` (p×q) and `precision` is `Σ̂_E⁻¹`.
pub fn rrr_forward(data: &Dataset, r: usize) -> Result<RrrFit> {
    rrr_fit(&data.x_centered, &data.y_centered, r)
}
