//! Indirect estimators of the forward coefficient matrix and the forward
//! baselines they are compared against.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{cross_cov, numerical_rank, Matrix, SymPosDef, Vector};
use crate::rrr::{rrr_inverse, rrr_forward, RrrFit};
use crate::simgen::{Dataset, JointGroundTruth};
use crate::sparse_est::{
    eta_lasso, glasso_with, lasso_forward, ols, ridge_ls, ridge_precision, GlassoSettings, PenaltyKind,
    RidgePenalty,
};
use crate::tuning::{
    cv_lasso_columns, cv_precision, cv_rank, cv_ridge, make_folds, FoldPlan, Grid, Orientation,
    RidgeTuning, Selection, DEFAULT_FOLDS,
};

/// Plug-in estimates of `η` (q×p), `Δ⁻¹` (p×p) and `Σ_YY⁻¹` (q×q).
#[derive(Debug, Clone)]
pub struct InversePlugins {
    pub eta_hat: Matrix,
    pub delta_inv_hat: SymPosDef,
    pub sigma_yy_inv_hat: SymPosDef,
}

impl InversePlugins {
    pub fn new(eta_hat: Matrix, delta_inv_hat: SymPosDef, sigma_yy_inv_hat: SymPosDef) -> Result<Self> {
        let (q, p) = eta_hat.shape();
        if delta_inv_hat.dim() != p || sigma_yy_inv_hat.dim() != q {
            return Err(Error::ShapeMismatch {
                expected: (p, q),
                got: (delta_inv_hat.dim(), sigma_yy_inv_hat.dim()),
            });
        }
        crate::matlin::ensure_finite(&eta_hat)?;
        Ok(Self {
            eta_hat,
            delta_inv_hat,
            sigma_yy_inv_hat,
        })
    }

    /// The true inverse-regression parameters.
    pub fn population(truth: &JointGroundTruth) -> Self {
        Self {
            eta_hat: truth.eta_star.clone(),
            delta_inv_hat: truth.delta_inv_star.clone(),
            sigma_yy_inv_hat: truth.sigma_yy_inv_star.clone(),
        }
    }
}

/// `β̂ = Δ̂⁻¹ η̂ᵀ (Σ̂_YY⁻¹ + η̂ Δ̂⁻¹ η̂ᵀ)⁻¹`.
///
/// With `Δ̂⁻¹ = L Lᵀ`, `Σ̂_YY⁻¹ = L_y L_yᵀ` and `A = Lᵀ η̂ᵀ`, the q×q matrix is
/// `BᵀB` for `B = [A; L_yᵀ]`. A thin QR `B = QR` gives `β̂ = L Q_A R⁻ᵀ`, where
/// `Q_A` is the top p rows of `Q`, without forming `BᵀB`. This matters when a
/// precision plug-in has entries many orders of magnitude apart. A zero `η̂`
/// returns an exact zero, which `Q_A` would only reproduce up to roundoff.
pub fn assemble_beta(plugins: &InversePlugins) -> Result<Matrix> {
    let l = plugins.delta_inv_hat.cholesky_factor();
    let ly = plugins.sigma_yy_inv_hat.cholesky_factor();
    let (p, q) = (l.nrows(), ly.nrows());
    if plugins.eta_hat.iter().all(|&v| v == 0.0) {
        return Ok(Matrix::zeros(p, q));
    }
    let a = l.transpose() * plugins.eta_hat.transpose();
    let mut stacked = Matrix::zeros(p + q, q);
    stacked.view_mut((0, 0), (p, q)).copy_from(&a);
    stacked.view_mut((p, 0), (q, q)).copy_from(&ly.transpose());
    let qr = stacked.qr();
    let q_top = qr.q().rows(0, p).into_owned();
    let x_t = qr
        .r()
        .solve_upper_triangular(&q_top.transpose())
        .ok_or(Error::Singular("assembly factor"))?;
    Ok(l * x_t.transpose())
}

/// Number of singular values above `1e-8` times the largest.
pub fn rank_of(beta_hat: &Matrix) -> Result<usize> {
    numerical_rank(beta_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorName {
    /// Lasso `η̂`, graphical-lasso `Δ̂⁻¹` and `Σ̂_YY⁻¹`.
    IL1,
    /// Lasso `η̂`, sample `Δ̂` and `Σ̂_YY`.
    IS,
    /// Lasso `η̂`, graphical-lasso `Σ̂_YY⁻¹`, ridge-penalized `Δ̂⁻¹`.
    IL2,
    /// Reduced-rank `η̂`, graphical-lasso `Δ̂⁻¹` and `Σ̂_YY⁻¹`.
    IR,
    /// Reduced-rank `η̂` with its joint precision and sample `Σ̂_YY`.
    IMlR,
    /// Lasso `η̂` with both true precisions.
    O,
    /// Lasso `η̂`, true `Δ⁻¹`, graphical-lasso `Σ̂_YY⁻¹`.
    ODelta,
    /// Lasso `η̂`, true `Σ_YY⁻¹`, graphical-lasso `Δ̂⁻¹`.
    OY,
    /// Reduced-rank `η̂` with both true precisions.
    OR,
    /// Reduced-rank `η̂`, graphical-lasso `Δ̂⁻¹`, true `Σ_YY⁻¹`.
    ODeltaR,
    /// Reduced-rank `η̂`, true `Δ⁻¹`, graphical-lasso `Σ̂_YY⁻¹`.
    OYR,
    /// Least squares, minimum-norm when `X` is rank deficient.
    OlsMp,
    /// Ridge with one shared penalty.
    R,
    /// Ridge with a penalty per response.
    L2,
    /// Lasso per response.
    L1,
    /// Forward reduced-rank regression.
    Rr,
}

impl EstimatorName {
    pub const ALL: [EstimatorName; 16] = [
        Self::IL1,
        Self::IS,
        Self::IL2,
        Self::IR,
        Self::IMlR,
        Self::O,
        Self::ODelta,
        Self::OY,
        Self::OR,
        Self::ODeltaR,
        Self::OYR,
        Self::OlsMp,
        Self::R,
        Self::L2,
        Self::L1,
        Self::Rr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IL1 => "I_L1",
            Self::IS => "I_S",
            Self::IL2 => "I_L2",
            Self::IR => "I_r",
            Self::IMlR => "I_ML_r",
            Self::O => "O",
            Self::ODelta => "O_delta",
            Self::OY => "O_Y",
            Self::OR => "O_r",
            Self::ODeltaR => "O_delta_r",
            Self::OYR => "O_Y_r",
            Self::OlsMp => "OLS_MP",
            Self::R => "R",
            Self::L2 => "L2",
            Self::L1 => "L1",
            Self::Rr => "RR",
        }
    }

    /// Part-oracle estimators need the generating parameters.
    pub fn is_oracle(self) -> bool {
        matches!(
            self,
            Self::O | Self::ODelta | Self::OY | Self::OR | Self::ODeltaR | Self::OYR
        )
    }
}

impl fmt::Display for EstimatorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        let alias = match key {
            "OLS" | "MP" => Some(Self::OlsMp),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.into_iter().find(|n| n.as_str().eq_ignore_ascii_case(key)))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator {s:?}")))
    }
}

/// How tuning parameters are chosen.
#[derive(Debug, Clone)]
pub struct TuningPolicy {
    pub grid: Grid,
    pub folds: usize,
    /// Seed of the fold assignment shared by every CV in one fit.
    pub fold_seed: u64,
    pub glasso: GlassoSettings,
}

impl Default for TuningPolicy {
    fn default() -> Self {
        Self {
            grid: Grid::default(),
            folds: DEFAULT_FOLDS,
            fold_seed: 0,
            glasso: GlassoSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorSpec {
    pub name: EstimatorName,
    pub tuning: TuningPolicy,
}

impl EstimatorSpec {
    pub fn new(name: EstimatorName) -> Self {
        Self {
            name,
            tuning: TuningPolicy::default(),
        }
    }
}

/// Selected tuning parameters and diagnostics of one fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub params: BTreeMap<String, Vec<f64>>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl FitMetadata {
    fn record(&mut self, key: &str, sel: &Selection<f64>) {
        self.params.entry(key.to_string()).or_default().push(sel.value);
        if sel.at_endpoint {
            self.warnings.push(format!("{key} selected at a grid endpoint ({:e})", sel.value));
        }
    }

    fn record_rank(&mut self, key: &str, sel: &Selection<usize>) {
        self.params.insert(key.to_string(), vec![sel.value as f64]);
        if sel.at_endpoint {
            self.warnings.push(format!("{key} selected at an end of the rank range ({})", sel.value));
        }
    }

    fn merge(&mut self, other: &FitMetadata) {
        for (k, v) in &other.params {
            self.params.insert(k.clone(), v.clone());
        }
        self.warnings.extend(other.warnings.iter().cloned());
        self.notes.extend(other.notes.iter().cloned());
    }
}

#[derive(Debug, Clone)]
pub struct BetaEstimate {
    pub name: EstimatorName,
    /// p×q coefficients.
    pub beta_hat: Matrix,
    /// `ȳ − β̂ᵀ x̄`.
    pub intercept_hat: Vector,
    pub metadata: FitMetadata,
}

impl BetaEstimate {
    /// Predictions for raw (uncentered) predictor rows.
    pub fn predict(&self, x_raw: &Matrix) -> Result<Matrix> {
        if x_raw.ncols() != self.beta_hat.nrows() {
            return Err(Error::ShapeMismatch {
                expected: (x_raw.nrows(), self.beta_hat.nrows()),
                got: x_raw.shape(),
            });
        }
        let mut out = x_raw * &self.beta_hat;
        for mut row in out.row_iter_mut() {
            row += self.intercept_hat.transpose();
        }
        Ok(out)
    }
}

/// Fits one estimator.
pub fn fit(spec: &EstimatorSpec, data: &Dataset, truth: Option<&JointGroundTruth>) -> Result<BetaEstimate> {
    Fitter::new(data, truth, spec.tuning.clone())?.fit(spec.name)
}

type Cached<T> = OnceCell<Result<T>>;

fn cached<T>(cell: &Cached<T>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(init).as_ref().map_err(Clone::clone)
}

/// Fits several estimators on one data set, sharing every intermediate
/// estimate (the lasso `η̂`, the reduced-rank `η̂`, the precision plug-ins)
/// and one fold assignment across them.
pub struct Fitter<'a> {
    data: &'a Dataset,
    truth: Option<&'a JointGroundTruth>,
    policy: TuningPolicy,
    plan: FoldPlan,
    eta_l1: Cached<(Matrix, FitMetadata)>,
    eta_rr: Cached<(RrrFit, FitMetadata)>,
    syy_glasso: Cached<(SymPosDef, FitMetadata)>,
    delta_glasso_l1: Cached<(SymPosDef, FitMetadata)>,
    delta_glasso_rr: Cached<(SymPosDef, FitMetadata)>,
}

impl<'a> Fitter<'a> {
    pub fn new(data: &'a Dataset, truth: Option<&'a JointGroundTruth>, policy: TuningPolicy) -> Result<Self> {
        if let Some(t) = truth {
            if (t.p(), t.q()) != (data.p(), data.q()) {
                return Err(Error::ShapeMismatch {
                    expected: (data.p(), data.q()),
                    got: (t.p(), t.q()),
                });
            }
        }
        let plan = make_folds(data.n(), policy.folds, policy.fold_seed)?;
        Ok(Self {
            data,
            truth,
            policy,
            plan,
            eta_l1: OnceCell::new(),
            eta_rr: OnceCell::new(),
            syy_glasso: OnceCell::new(),
            delta_glasso_l1: OnceCell::new(),
            delta_glasso_rr: OnceCell::new(),
        })
    }

    pub fn plan(&self) -> &FoldPlan {
        &self.plan
    }

    fn oracle(&self, name: EstimatorName) -> Result<&'a JointGroundTruth> {
        self.truth.ok_or_else(|| Error::MissingOracle(name.to_string()))
    }

    fn eta_l1(&self) -> Result<&(Matrix, FitMetadata)> {
        cached(&self.eta_l1, || {
            let d = self.data;
            let sels = cv_lasso_columns(&d.y_centered, &d.x_centered, &self.policy.grid, &self.plan)?;
            let mut meta = FitMetadata::default();
            for s in &sels {
                meta.record("lambda_eta", s);
            }
            meta.notes.push("lasso eta fitted once per data set and shared".into());
            let lambdas: Vec<f64> = sels.iter().map(|s| s.value).collect();
            Ok((eta_lasso(d, &lambdas)?, meta))
        })
    }

    fn eta_rr(&self) -> Result<&(RrrFit, FitMetadata)> {
        cached(&self.eta_rr, || {
            let sel = cv_rank(self.data, Orientation::Inverse, &self.plan)?;
            let mut meta = FitMetadata::default();
            meta.record_rank("rank_eta", &sel);
            Ok((rrr_inverse(self.data, sel.value)?, meta))
        })
    }

    /// Graphical lasso on the rows of `obs` with the penalty chosen by
    /// validation likelihood.
    fn glasso_plugin(&self, obs: &Matrix, key: &str) -> Result<(SymPosDef, FitMetadata)> {
        let settings = &self.policy.glasso;
        let sel = cv_precision(obs, &self.policy.grid, &self.plan, PenaltyKind::L1OffDiagonal, settings)?;
        let fit = glasso_with(&cross_cov(obs), sel.value, None, settings)?;
        let mut meta = FitMetadata::default();
        meta.record(key, &sel);
        meta.params.insert(format!("{key}_sweeps"), vec![fit.sweeps as f64]);
        Ok((fit.omega, meta))
    }

    fn syy_glasso(&self) -> Result<&(SymPosDef, FitMetadata)> {
        cached(&self.syy_glasso, || self.glasso_plugin(&self.data.y_centered, "gamma_yy"))
    }

    fn residuals(&self, eta: &Matrix) -> Matrix {
        &self.data.x_centered - &self.data.y_centered * eta
    }

    fn delta_glasso_l1(&self) -> Result<&(SymPosDef, FitMetadata)> {
        cached(&self.delta_glasso_l1, || {
            let resid = self.residuals(&self.eta_l1()?.0);
            self.glasso_plugin(&resid, "gamma_delta")
        })
    }

    fn delta_glasso_rr(&self) -> Result<&(SymPosDef, FitMetadata)> {
        cached(&self.delta_glasso_rr, || {
            let resid = self.residuals(&self.eta_rr()?.0.coef);
            self.glasso_plugin(&resid, "gamma_delta")
        })
    }

    fn delta_ridge_l1(&self) -> Result<(SymPosDef, FitMetadata)> {
        let resid = self.residuals(&self.eta_l1()?.0);
        let settings = &self.policy.glasso;
        let sel = cv_precision(&resid, &self.policy.grid, &self.plan, PenaltyKind::L2All, settings)?;
        let mut meta = FitMetadata::default();
        meta.record("gamma_delta_ridge", &sel);
        Ok((ridge_precision(&cross_cov(&resid), sel.value)?, meta))
    }

    fn sample_syy_inv(&self) -> Result<SymPosDef> {
        SymPosDef::new(cross_cov(&self.data.y_centered))
            .and_then(|s| s.inverse())
            .map_err(|_| Error::Singular("sample covariance of Y"))
    }

    fn sample_delta_inv(&self) -> Result<SymPosDef> {
        let resid = self.residuals(&self.eta_l1()?.0);
        SymPosDef::new(cross_cov(&resid))
            .and_then(|s| s.inverse())
            .map_err(|_| Error::Singular("sample inverse-regression residual covariance"))
    }

    fn indirect(
        &self,
        eta: &Matrix,
        delta_inv: SymPosDef,
        syy_inv: SymPosDef,
        parts: &[&FitMetadata],
    ) -> Result<(Matrix, FitMetadata)> {
        let plugins = InversePlugins::new(eta.clone(), delta_inv, syy_inv)?;
        let mut meta = FitMetadata::default();
        for p in parts {
            meta.merge(p);
        }
        Ok((assemble_beta(&plugins)?, meta))
    }

    pub fn fit(&self, name: EstimatorName) -> Result<BetaEstimate> {
        use EstimatorName::*;
        let empty = FitMetadata::default();
        let (beta_hat, metadata) = match name {
            IL1 => {
                let (eta, m1) = self.eta_l1()?;
                let (d, m2) = self.delta_glasso_l1()?;
                let (s, m3) = self.syy_glasso()?;
                self.indirect(eta, d.clone(), s.clone(), &[m1, m2, m3])?
            }
            IS => {
                let (eta, m1) = self.eta_l1()?;
                self.indirect(eta, self.sample_delta_inv()?, self.sample_syy_inv()?, &[m1])?
            }
            IL2 => {
                let (eta, m1) = self.eta_l1()?;
                let (d, m2) = self.delta_ridge_l1()?;
                let (s, m3) = self.syy_glasso()?;
                self.indirect(eta, d, s.clone(), &[m1, &m2, m3])?
            }
            O => {
                let t = self.oracle(name)?;
                let (eta, m1) = self.eta_l1()?;
                self.indirect(eta, t.delta_inv_star.clone(), t.sigma_yy_inv_star.clone(), &[m1])?
            }
            ODelta => {
                let t = self.oracle(name)?;
                let (eta, m1) = self.eta_l1()?;
                let (s, m2) = self.syy_glasso()?;
                self.indirect(eta, t.delta_inv_star.clone(), s.clone(), &[m1, m2])?
            }
            OY => {
                let t = self.oracle(name)?;
                let (eta, m1) = self.eta_l1()?;
                let (d, m2) = self.delta_glasso_l1()?;
                self.indirect(eta, d.clone(), t.sigma_yy_inv_star.clone(), &[m1, m2])?
            }
            IR => {
                let (rr, m1) = self.eta_rr()?;
                let (d, m2) = self.delta_glasso_rr()?;
                let (s, m3) = self.syy_glasso()?;
                self.indirect(&rr.coef, d.clone(), s.clone(), &[m1, m2, m3])?
            }
            IMlR => {
                let (rr, m1) = self.eta_rr()?;
                self.indirect(&rr.coef, rr.precision.clone(), self.sample_syy_inv()?, &[m1])?
            }
            OR => {
                let t = self.oracle(name)?;
                let (rr, m1) = self.eta_rr()?;
                self.indirect(&rr.coef, t.delta_inv_star.clone(), t.sigma_yy_inv_star.clone(), &[m1])?
            }
            ODeltaR => {
                let t = self.oracle(name)?;
                let (rr, m1) = self.eta_rr()?;
                let (d, m2) = self.delta_glasso_rr()?;
                self.indirect(&rr.coef, d.clone(), t.sigma_yy_inv_star.clone(), &[m1, m2])?
            }
            OYR => {
                let t = self.oracle(name)?;
                let (rr, m1) = self.eta_rr()?;
                let (s, m2) = self.syy_glasso()?;
                self.indirect(&rr.coef, t.delta_inv_star.clone(), s.clone(), &[m1, m2])?
            }
            OlsMp => (ols(self.data)?, empty),
            R => {
                let sel = cv_ridge(self.data, &self.policy.grid, &self.plan, RidgeTuning::Shared)?.remove(0);
                let mut meta = FitMetadata::default();
                meta.record("lambda_ridge", &sel);
                (ridge_ls(self.data, &RidgePenalty::Shared(sel.value))?, meta)
            }
            L2 => {
                let sels = cv_ridge(self.data, &self.policy.grid, &self.plan, RidgeTuning::PerResponse)?;
                let mut meta = FitMetadata::default();
                for s in &sels {
                    meta.record("lambda_l2", s);
                }
                let lambdas = sels.iter().map(|s| s.value).collect();
                (ridge_ls(self.data, &RidgePenalty::PerResponse(lambdas))?, meta)
            }
            L1 => {
                let d = self.data;
                let sels = cv_lasso_columns(&d.x_centered, &d.y_centered, &self.policy.grid, &self.plan)?;
                let mut meta = FitMetadata::default();
                for s in &sels {
                    meta.record("lambda_l1", s);
                }
                let lambdas: Vec<f64> = sels.iter().map(|s| s.value).collect();
                (lasso_forward(d, &lambdas)?, meta)
            }
            Rr => {
                let sel = cv_rank(self.data, Orientation::Forward, &self.plan)?;
                let mut meta = FitMetadata::default();
                meta.record_rank("rank_beta", &sel);
                (rrr_forward(self.data, sel.value)?.coef, meta)
            }
        };
        crate::matlin::ensure_finite(&beta_hat)?;
        let intercept_hat = &self.data.y_mean - beta_hat.transpose() * &self.data.x_mean;
        Ok(BetaEstimate {
            name,
            beta_hat,
            intercept_hat,
            metadata,
        })
    }
}
