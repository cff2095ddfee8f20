//! Seeded data-generating processes for the simulation studies.
//!
//! Three designs are supported: a sparse inverse regression, a reduced-rank
//! inverse regression, and a reduced-rank forward regression. Every generator
//! returns both the data and the full set of population parameters needed to
//! score an estimate.
//!
//! Randomness comes from ChaCha20 seeded with a 64-bit seed. Standard normals
//! are drawn with the ziggurat method of `rand_distr::StandardNormal`, and a
//! multivariate normal draw is `L z` with `L` the Cholesky factor of the
//! covariance. Within one seed the draw order is fixed: model parameters
//! first, then the responses (inverse designs) or predictors (forward design),
//! then the conditional noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{partitioned_precision, JointCovariance, Matrix, SymPosDef, Vector};

/// Name of the standard normal transform, recorded in report metadata.
pub const NORMAL_METHOD: &str = "ziggurat (rand_distr::StandardNormal) via ChaCha20";

pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// AR(1) correlation matrix with entry `(i, j) = rho^|i-j|`.
pub fn ar1(dim: usize, rho: f64) -> Result<SymPosDef> {
    if !(rho.abs() < 1.0) {
        return Err(Error::BadRho(rho));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("AR(1) dimension must be positive".into()));
    }
    let m = Matrix::from_fn(dim, dim, |i, j| rho.powi(i.abs_diff(j) as i32));
    SymPosDef::new(m)
}

fn standard_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    // Filled row by row so the draw order does not depend on storage layout.
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// `n` independent rows drawn from `N(0, cov)`.
pub fn sample_mvn_with(cov: &SymPosDef, n: usize, rng: &mut impl Rng) -> Matrix {
    let z = standard_normal(n, cov.dim(), rng);
    z * cov.cholesky_factor().transpose()
}

pub fn sample_mvn(cov: &SymPosDef, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    Ok(sample_mvn_with(cov, n, &mut rng_from_seed(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseInverseModelSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rho_y: f64,
    pub rho_delta: f64,
    pub s_star: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedRankInverseModelSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rho_y: f64,
    pub rho_delta: f64,
    pub r_star: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedRankForwardModelSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub rho_x: f64,
    pub rho_e: f64,
    pub r_star: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    SparseInverse(SparseInverseModelSpec),
    ReducedRankInverse(ReducedRankInverseModelSpec),
    ReducedRankForward(ReducedRankForwardModelSpec),
}

impl ModelSpec {
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            ModelSpec::SparseInverse(s) => (s.n, s.p, s.q),
            ModelSpec::ReducedRankInverse(s) => (s.n, s.p, s.q),
            ModelSpec::ReducedRankForward(s) => (s.n, s.p, s.q),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::SparseInverse(s) => s.seed,
            ModelSpec::ReducedRankInverse(s) => s.seed,
            ModelSpec::ReducedRankForward(s) => s.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelSpec::SparseInverse(s) => s.seed = seed,
            ModelSpec::ReducedRankInverse(s) => s.seed = seed,
            ModelSpec::ReducedRankForward(s) => s.seed = seed,
        }
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        match &mut self {
            ModelSpec::SparseInverse(s) => s.n = n,
            ModelSpec::ReducedRankInverse(s) => s.n = n,
            ModelSpec::ReducedRankForward(s) => s.n = n,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p, q) = self.dims();
        if n < 2 || p == 0 || q == 0 {
            return Err(Error::InvalidArgument(format!(
                "need n ≥ 2 and p, q ≥ 1 (got n={n}, p={p}, q={q})"
            )));
        }
        let (rhos, rank) = match self {
            ModelSpec::SparseInverse(s) => {
                if !(s.s_star > 0.0 && s.s_star <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "sparsity {} must lie in (0, 1]",
                        s.s_star
                    )));
                }
                ([s.rho_y, s.rho_delta], None)
            }
            ModelSpec::ReducedRankInverse(s) => ([s.rho_y, s.rho_delta], Some(s.r_star)),
            ModelSpec::ReducedRankForward(s) => ([s.rho_x, s.rho_e], Some(s.r_star)),
        };
        for rho in rhos {
            if !(rho.abs() < 1.0) {
                return Err(Error::BadRho(rho));
            }
        }
        if let Some(r) = rank {
            if r > p.min(q) {
                return Err(Error::RankTooLarge {
                    rank: r,
                    max: p.min(q),
                });
            }
        }
        Ok(())
    }
}

/// Population parameters of one generated data set. The mean is zero.
#[derive(Debug, Clone)]
pub struct JointGroundTruth {
    pub eta_star: Matrix,
    pub delta_star: SymPosDef,
    pub sigma_yy_star: SymPosDef,
    pub beta_star: Matrix,
    pub sigma_xx_star: SymPosDef,
    pub sigma_e_star: SymPosDef,
    pub delta_inv_star: SymPosDef,
    pub sigma_yy_inv_star: SymPosDef,
}

impl JointGroundTruth {
    /// Completes the parameter set from the inverse-regression triple.
    pub fn from_inverse(eta: Matrix, delta: SymPosDef, sigma_yy: SymPosDef) -> Result<Self> {
        let (q, p) = eta.shape();
        if delta.dim() != p || sigma_yy.dim() != q {
            return Err(Error::ShapeMismatch {
                expected: (q, p),
                got: (sigma_yy.dim(), delta.dim()),
            });
        }
        // Σ_XY = ηᵀ Σ_YY and Σ_XX = Δ + ηᵀ Σ_YY η.
        let sigma_xy = eta.transpose() * sigma_yy.matrix();
        let sigma_xx = delta.matrix() + &sigma_xy * &eta;
        let jc = JointCovariance::from_blocks(&sigma_xx, &sigma_xy, sigma_yy.matrix())?;
        Self::from_joint(&jc)
    }

    /// Completes the parameter set from the forward-regression triple.
    pub fn from_forward(beta: Matrix, sigma_xx: SymPosDef, sigma_e: SymPosDef) -> Result<Self> {
        let (p, q) = beta.shape();
        if sigma_xx.dim() != p || sigma_e.dim() != q {
            return Err(Error::ShapeMismatch {
                expected: (p, q),
                got: (sigma_xx.dim(), sigma_e.dim()),
            });
        }
        let sigma_xy = sigma_xx.matrix() * &beta;
        let sigma_yy = sigma_e.matrix() + beta.transpose() * &sigma_xy;
        let jc = JointCovariance::from_blocks(sigma_xx.matrix(), &sigma_xy, &sigma_yy)?;
        Self::from_joint(&jc)
    }

    pub fn from_joint(jc: &JointCovariance) -> Result<Self> {
        let pp = partitioned_precision(jc)?;
        let sigma_yy_star = SymPosDef::new(jc.sigma_yy())?;
        Ok(Self {
            delta_star: pp.delta_inv.inverse()?,
            sigma_e_star: pp.sigma_e_inv.inverse()?,
            sigma_yy_inv_star: sigma_yy_star.inverse()?,
            sigma_xx_star: SymPosDef::new(jc.sigma_xx())?,
            sigma_yy_star,
            eta_star: pp.eta,
            beta_star: pp.beta,
            delta_inv_star: pp.delta_inv,
        })
    }

    pub fn p(&self) -> usize {
        self.beta_star.nrows()
    }

    pub fn q(&self) -> usize {
        self.beta_star.ncols()
    }
}

/// Centered predictor and response matrices with the removed means.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x_centered: Matrix,
    pub y_centered: Matrix,
    pub x_mean: Vector,
    pub y_mean: Vector,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x_centered.nrows()
    }

    pub fn p(&self) -> usize {
        self.x_centered.ncols()
    }

    pub fn q(&self) -> usize {
        self.y_centered.ncols()
    }

    /// The rows listed in `rows`, recentered at their own means. The stored
    /// means refer to the original (uncentered) scale.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let x = self.x_centered.select_rows(rows);
        let y = self.y_centered.select_rows(rows);
        let mut d = center(&x, &y)?;
        d.x_mean += &self.x_mean;
        d.y_mean += &self.y_mean;
        Ok(d)
    }
}

pub fn column_means(a: &Matrix) -> Vector {
    let n = a.nrows() as f64;
    Vector::from_iterator(a.ncols(), a.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `mean` from every row.
pub fn sweep_rows(a: &Matrix, mean: &Vector) -> Matrix {
    let mut out = a.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

pub fn center(raw_x: &Matrix, raw_y: &Matrix) -> Result<Dataset> {
    if raw_x.nrows() != raw_y.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (raw_x.nrows(), raw_y.ncols()),
            got: raw_y.shape(),
        });
    }
    if raw_x.nrows() < 2 || raw_x.ncols() == 0 || raw_y.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "centering needs at least two rows and one column in each block".into(),
        ));
    }
    crate::matlin::ensure_finite(raw_x)?;
    crate::matlin::ensure_finite(raw_y)?;
    let x_mean = column_means(raw_x);
    let y_mean = column_means(raw_y);
    Ok(Dataset {
        x_centered: sweep_rows(raw_x, &x_mean),
        y_centered: sweep_rows(raw_y, &y_mean),
        x_mean,
        y_mean,
    })
}

/// Draws the model parameters and a data set of size `n` for `spec`.
pub fn generate(spec: &ModelSpec) -> Result<(JointGroundTruth, Dataset)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed());
    match spec {
        ModelSpec::SparseInverse(s) => {
            let z = standard_normal(s.q, s.p, &mut rng);
            let mask = Bernoulli::new(s.s_star).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut eta = z;
            for i in 0..s.q {
                for j in 0..s.p {
                    if !mask.sample(&mut rng) {
                        eta[(i, j)] = 0.0;
                    }
                }
            }
            let truth =
                JointGroundTruth::from_inverse(eta, ar1(s.p, s.rho_delta)?, ar1(s.q, s.rho_y)?)?;
            let data = draw_inverse(&truth, s.n, &mut rng)?;
            Ok((truth, data))
        }
        ModelSpec::ReducedRankInverse(s) => {
            let left = standard_normal(s.q, s.r_star, &mut rng);
            let right = standard_normal(s.r_star, s.p, &mut rng);
            let truth = JointGroundTruth::from_inverse(
                left * right,
                ar1(s.p, s.rho_delta)?,
                ar1(s.q, s.rho_y)?,
            )?;
            let data = draw_inverse(&truth, s.n, &mut rng)?;
            Ok((truth, data))
        }
        ModelSpec::ReducedRankForward(s) => {
            let left = standard_normal(s.p, s.r_star, &mut rng);
            let unif = Uniform::new(-0.25, 0.25).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut right = Matrix::zeros(s.r_star, s.q);
            for i in 0..s.r_star {
                for j in 0..s.q {
                    right[(i, j)] = unif.sample(&mut rng);
                }
            }
            let truth =
                JointGroundTruth::from_forward(left * right, ar1(s.p, s.rho_x)?, ar1(s.q, s.rho_e)?)?;
            let x = sample_mvn_with(&truth.sigma_xx_star, s.n, &mut rng);
            let noise = sample_mvn_with(&truth.sigma_e_star, s.n, &mut rng);
            let y = &x * &truth.beta_star + noise;
            Ok((truth, center(&x, &y)?))
        }
    }
}

fn draw_inverse(truth: &JointGroundTruth, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    let y = sample_mvn_with(&truth.sigma_yy_star, n, rng);
    let noise = sample_mvn_with(&truth.delta_star, n, rng);
    let x = &y * &truth.eta_star + noise;
    center(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{cross_cov, numerical_rank};

    fn sparse_spec(seed: u64) -> ModelSpec {
        ModelSpec::SparseInverse(SparseInverseModelSpec {
            n: 100,
            p: 20,
            q: 20,
            rho_y: 0.7,
            rho_delta: 0.0,
            s_star: 0.1,
            seed,
        })
    }

    #[test]
    fn ar1_cases() {
        assert_eq!(ar1(3, 0.0).unwrap().matrix(), &Matrix::identity(3, 3));
        let a = ar1(2, 0.7).unwrap();
        assert_eq!(a.matrix(), &Matrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]));
        let big = ar1(20, 0.9).unwrap();
        assert!((big.matrix()[(0, 19)] - 0.9f64.powi(19)).abs() < 1e-15);
        assert!(matches!(ar1(3, 1.0), Err(Error::BadRho(_))));
        assert!(matches!(ar1(3, -1.5), Err(Error::BadRho(_))));
    }

    #[test]
    fn mvn_identity_covariance() {
        let x = sample_mvn(&SymPosDef::identity(3), 100_000, 11).unwrap();
        let s = x.transpose() * &x / x.nrows() as f64;
        assert!((s - Matrix::identity(3, 3)).amax() < 0.05);
    }

    #[test]
    fn mvn_is_deterministic() {
        let cov = ar1(4, 0.5).unwrap();
        assert_eq!(sample_mvn(&cov, 50, 3).unwrap(), sample_mvn(&cov, 50, 3).unwrap());
        assert_ne!(sample_mvn(&cov, 50, 3).unwrap(), sample_mvn(&cov, 50, 4).unwrap());
    }

    #[test]
    fn mvn_variance_moment() {
        let n = 40_000;
        let x = sample_mvn(&SymPosDef::from_diagonal(&[4.0]).unwrap(), n, 12).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        // Var of the sample second moment is 2σ⁴/n.
        let se = (2.0 * 16.0 / n as f64).sqrt();
        assert!((var - 4.0).abs() < 3.0 * se, "variance {var}");
    }

    #[test]
    fn dense_sparse_spec_degenerates() {
        let spec = ModelSpec::SparseInverse(SparseInverseModelSpec {
            n: 30,
            p: 4,
            q: 3,
            rho_y: 0.0,
            rho_delta: 0.0,
            s_star: 1.0,
            seed: 5,
        });
        let (truth, data) = generate(&spec).unwrap();
        assert!(truth.eta_star.iter().all(|v| *v != 0.0));
        assert_eq!(truth.delta_star.matrix(), &Matrix::identity(4, 4));
        assert_eq!(data.x_centered.shape(), (30, 4));
        assert_eq!(data.y_centered.shape(), (30, 3));
    }

    #[test]
    fn reduced_rank_inverse_rank_matches() {
        let spec = ModelSpec::ReducedRankInverse(ReducedRankInverseModelSpec {
            n: 100,
            p: 20,
            q: 20,
            rho_y: 0.7,
            rho_delta: 0.9,
            r_star: 4,
            seed: 9,
        });
        let (truth, _) = generate(&spec).unwrap();
        assert_eq!(numerical_rank(&truth.eta_star).unwrap(), 4);
        assert_eq!(numerical_rank(&truth.beta_star).unwrap(), 4);
    }

    #[test]
    fn reduced_rank_forward_truth_is_consistent() {
        let spec = ModelSpec::ReducedRankForward(ReducedRankForwardModelSpec {
            n: 100,
            p: 20,
            q: 20,
            rho_x: 0.7,
            rho_e: 0.9,
            r_star: 8,
            seed: 2,
        });
        let (truth, data) = generate(&spec).unwrap();
        assert_eq!(numerical_rank(&truth.beta_star).unwrap(), 8);
        assert_eq!(numerical_rank(&truth.eta_star).unwrap(), 8);
        assert_eq!(truth.sigma_xx_star.matrix(), ar1(20, 0.7).unwrap().matrix());
        assert!((truth.sigma_e_star.matrix() - ar1(20, 0.9).unwrap().matrix()).amax() < 1e-9);
        assert_eq!(data.n(), 100);
    }

    #[test]
    fn table_one_cell_generates() {
        let (truth, data) = generate(&sparse_spec(1)).unwrap();
        assert_eq!((data.n(), data.p(), data.q()), (100, 20, 20));
        assert_eq!(truth.eta_star.shape(), (20, 20));
        // Law of total variance under the inverse model.
        let sxx = truth.delta_star.matrix()
            + truth.eta_star.transpose() * truth.sigma_yy_star.matrix() * &truth.eta_star;
        assert!((sxx - truth.sigma_xx_star.matrix()).amax() < 1e-12);
    }

    #[test]
    fn population_forward_formula_matches() {
        for seed in 0..50 {
            let (truth, _) = generate(&sparse_spec(seed)).unwrap();
            let sxy = truth.eta_star.transpose() * truth.sigma_yy_star.matrix();
            let direct = truth.sigma_xx_star.solve(&sxy);
            let err = (&direct - &truth.beta_star).norm() / truth.beta_star.norm().max(1e-300);
            assert!(err <= 1e-9, "seed {seed}: {err}");
        }
    }

    #[test]
    fn bernoulli_mask_density() {
        let mut rng = rng_from_seed(77);
        let mask = Bernoulli::new(0.1).unwrap();
        let draws = 1_000_000;
        let hits = (0..draws).filter(|_| mask.sample(&mut rng)).count();
        assert!((hits as f64 / draws as f64 - 0.1).abs() < 0.002);
    }

    #[test]
    fn centering_cases() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let y = Matrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = center(&x, &y).unwrap();
        assert!(d.x_centered.column(1).iter().all(|v| *v == 0.0));
        assert_eq!(d.x_mean.as_slice(), &[2.0, 5.0]);

        let again = center(&d.x_centered, &d.y_centered).unwrap();
        assert!((&again.x_centered - &d.x_centered).amax() <= 1e-12);

        let mut rng = rng_from_seed(3);
        let raw = standard_normal(25, 6, &mut rng).add_scalar(3.0);
        let d = center(&raw.columns(0, 4).into_owned(), &raw.columns(4, 2).into_owned()).unwrap();
        assert!(column_means(&d.x_centered).amax() <= 1e-12);
        assert!(column_means(&d.y_centered).amax() <= 1e-12);

        assert!(matches!(
            center(&Matrix::zeros(3, 2), &Matrix::zeros(4, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn generated_data_covariance_is_plausible() {
        let spec = ModelSpec::SparseInverse(SparseInverseModelSpec {
            n: 20_000,
            p: 3,
            q: 2,
            rho_y: 0.5,
            rho_delta: 0.3,
            s_star: 1.0,
            seed: 8,
        });
        let (truth, data) = generate(&spec).unwrap();
        let syy = cross_cov(&data.y_centered);
        assert!((syy - truth.sigma_yy_star.matrix()).amax() < 0.05);
    }
}
