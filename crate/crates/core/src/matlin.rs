//! Dense linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Positive definiteness is carried in
//! the type system by [`SymPosDef`], which can only be built from a matrix whose
//! Cholesky factorization succeeds; the factor is kept alongside the matrix so
//! solves, inverses and log-determinants never refactor.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Convergence tolerance for the symmetric eigensolver and the SVD.
pub const DECOMP_TOL: f64 = 1e-12;

/// Singular values at or below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Inputs whose asymmetry exceeds this (relative to the largest entry) are
/// rejected rather than symmetrized.
const SYMMETRY_TOL: f64 = 1e-10;

fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn ensure_finite(a: &Matrix) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_square(a: &Matrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            expected: (a.nrows(), a.nrows()),
            got: a.shape(),
        })
    }
}

/// Largest absolute difference between `a` and its transpose.
pub fn asymmetry(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// `(a + aᵀ) / 2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL * max_abs(a).max(1e-300) {
        return Err(Error::NonSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = a`.
///
/// Pivot `j` counts as positive only when it exceeds `dim · ε · a_jj`, so
/// numerically semidefinite matrices are rejected instead of producing a
/// factor with a near-zero diagonal. The test is relative to each diagonal
/// entry, which keeps it unchanged under diagonal rescaling of `a`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let n = a.nrows();
    let eps = n as f64 * f64::EPSILON;
    // Build the upper factor `U = Lᵀ` column by column so that every inner
    // product runs over contiguous storage.
    let mut u = Matrix::zeros(n, n);
    {
        let us = u.as_mut_slice();
        for j in 0..n {
            let (head, tail) = us.split_at_mut(j * n);
            let col_j = &mut tail[..n];
            for i in 0..j {
                let col_i = &head[i * n..i * n + n];
                let dot: f64 = col_i[..i].iter().zip(&col_j[..i]).map(|(x, y)| x * y).sum();
                col_j[i] = (a[(i, j)] - dot) / col_i[i];
            }
            let d = a[(j, j)] - col_j[..j].iter().map(|x| x * x).sum::<f64>();
            if !(d > eps * a[(j, j)]) {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            col_j[j] = d.sqrt();
        }
    }
    Ok(u.transpose())
}

/// A symmetric positive definite matrix together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SymPosDef {
    mat: Matrix,
    chol: Matrix,
}

impl SymPosDef {
    /// Symmetrizes `a` and verifies positive definiteness.
    pub fn new(a: Matrix) -> Result<Self> {
        ensure_square(&a)?;
        ensure_finite(&a)?;
        check_symmetric(&a)?;
        let mat = symmetrize(&a);
        let chol = cholesky(&mat)?;
        Ok(Self { mat, chol })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Matrix::identity(dim, dim),
            chol: Matrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    /// The lower-triangular factor `L` with `L Lᵀ = self`.
    pub fn cholesky_factor(&self) -> &Matrix {
        &self.chol
    }

    /// Solves `self · X = b`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        // The factor has a strictly positive diagonal, so both triangular
        // solves always succeed.
        let y = self
            .chol
            .solve_lower_triangular(b)
            .expect("cholesky factor has positive diagonal");
        self.chol
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has positive diagonal")
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> Result<SymPosDef> {
        spd_inverse(self)
    }
}

pub fn spd_inverse(a: &SymPosDef) -> Result<SymPosDef> {
    let n = a.dim();
    SymPosDef::new(a.solve(&Matrix::identity(n, n)))
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: Vector,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix,
}

impl SymEigen {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let scaled = Matrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        symmetrize(&(scaled * self.vectors.transpose()))
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// Each eigenvector is signed so that its first non-negligible coordinate is
/// positive, making the output deterministic.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    ensure_square(a)?;
    ensure_finite(a)?;
    check_symmetric(a)?;
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(symmetrize(a), DECOMP_TOL, 100 * n.max(1))
        .ok_or(Error::NoConvergence {
            what: "symmetric eigensolver",
            iterations: 100 * n,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12) {
            if *lead < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymEigen { values, vectors })
}

fn svd(a: &Matrix, vectors: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    ensure_finite(a)?;
    let cap = 100 * a.nrows().max(a.ncols()).max(1);
    SVD::try_new(a.clone(), vectors, vectors, DECOMP_TOL, cap).ok_or(Error::NoConvergence {
        what: "singular value decomposition",
        iterations: cap,
    })
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Result<Vector> {
    let mut sv: Vec<f64> = svd(a, false)?.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(Vector::from_vec(sv))
}

/// Moore–Penrose generalized inverse.
pub fn pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    let (m, n) = a.shape();
    let dec = svd(a, true)?;
    let u = dec.u.as_ref().expect("requested U");
    let v_t = dec.v_t.as_ref().expect("requested Vᵀ");
    let s_max = dec.singular_values.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let cutoff = m.max(n) as f64 * f64::EPSILON * s_max;
    let mut out = Matrix::zeros(n, m);
    for (k, &s) in dec.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (v_t.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    Ok(out)
}

/// Number of singular values above `RANK_TOL` times the largest.
pub fn numerical_rank(a: &Matrix) -> Result<usize> {
    if a.is_empty() {
        return Ok(0);
    }
    let sv = singular_values(a)?;
    let top = sv[0];
    if top <= 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > RANK_TOL * top).count())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub spectral: f64,
}

pub fn norms(a: &Matrix) -> Result<Norms> {
    Ok(Norms {
        frobenius: a.norm(),
        spectral: spectral_norm(a)?,
    })
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}

/// The symmetric positive definite square root.
pub fn spd_sqrt(a: &SymPosDef) -> Result<SymPosDef> {
    let eig = sym_eigen(a.matrix())?;
    SymPosDef::new(eig.map_values(|v| v.max(0.0).sqrt()))
}

/// Joint covariance of `(X, Y)` with the predictor block first.
#[derive(Debug, Clone)]
pub struct JointCovariance {
    p: usize,
    q: usize,
    sigma: SymPosDef,
}

impl JointCovariance {
    pub fn new(sigma: SymPosDef, p: usize) -> Result<Self> {
        let dim = sigma.dim();
        if p == 0 || p >= dim {
            return Err(Error::InvalidArgument(format!(
                "predictor block size {p} must be in 1..{dim}"
            )));
        }
        let jc = Self {
            p,
            q: dim - p,
            sigma,
        };
        SymPosDef::new(jc.sigma_xx())?;
        SymPosDef::new(jc.sigma_yy())?;
        Ok(jc)
    }

    /// Assembles the joint covariance from its three blocks.
    pub fn from_blocks(sigma_xx: &Matrix, sigma_xy: &Matrix, sigma_yy: &Matrix) -> Result<Self> {
        let p = sigma_xx.nrows();
        let q = sigma_yy.nrows();
        if sigma_xy.shape() != (p, q) {
            return Err(Error::ShapeMismatch {
                expected: (p, q),
                got: sigma_xy.shape(),
            });
        }
        let mut full = Matrix::zeros(p + q, p + q);
        full.view_mut((0, 0), (p, p)).copy_from(sigma_xx);
        full.view_mut((0, p), (p, q)).copy_from(sigma_xy);
        full.view_mut((p, 0), (q, p)).copy_from(&sigma_xy.transpose());
        full.view_mut((p, p), (q, q)).copy_from(sigma_yy);
        Self::new(SymPosDef::new(full)?, p)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sigma(&self) -> &SymPosDef {
        &self.sigma
    }

    pub fn sigma_xx(&self) -> Matrix {
        self.sigma.matrix().view((0, 0), (self.p, self.p)).into_owned()
    }

    pub fn sigma_xy(&self) -> Matrix {
        self.sigma.matrix().view((0, self.p), (self.p, self.q)).into_owned()
    }

    pub fn sigma_yy(&self) -> Matrix {
        self.sigma.matrix().view((self.p, self.p), (self.q, self.q)).into_owned()
    }
}

/// Blocks of the joint precision matrix and the two regression coefficient
/// matrices they determine.
#[derive(Debug, Clone)]
pub struct PartitionedPrecision {
    /// Inverse of `Δ = Σ_XX − Σ_XY Σ_YY⁻¹ Σ_XYᵀ`.
    pub delta_inv: SymPosDef,
    /// Inverse-regression coefficients `Σ_YY⁻¹ Σ_XYᵀ` (q×p).
    pub eta: Matrix,
    /// Inverse of `Σ_E = Σ_YY − Σ_XYᵀ Σ_XX⁻¹ Σ_XY`.
    pub sigma_e_inv: SymPosDef,
    /// Forward coefficients `Σ_XX⁻¹ Σ_XY` (p×q).
    pub beta: Matrix,
}

pub fn partitioned_precision(jc: &JointCovariance) -> Result<PartitionedPrecision> {
    let sxx = SymPosDef::new(jc.sigma_xx())?;
    let syy = SymPosDef::new(jc.sigma_yy())?;
    let sxy = jc.sigma_xy();
    let eta = syy.solve(&sxy.transpose());
    let delta = SymPosDef::new(sxx.matrix() - &sxy * &eta)?;
    let beta = sxx.solve(&sxy);
    let sigma_e = SymPosDef::new(syy.matrix() - sxy.transpose() * &beta)?;
    Ok(PartitionedPrecision {
        delta_inv: delta.inverse()?,
        eta,
        sigma_e_inv: sigma_e.inverse()?,
        beta,
    })
}

/// `aᵀa / a.nrows()`: the sample covariance of already-centered rows.
pub fn cross_cov(a: &Matrix) -> Matrix {
    symmetrize(&(a.transpose() * a / a.nrows() as f64))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    pub fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let a = gaussian(dim, dim, rng);
        &a * a.transpose() + Matrix::identity(dim, dim)
    }

    pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }
}
