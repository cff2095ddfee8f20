//! Penalized Gaussian likelihood precision estimators.
//!
//! Both minimize `tr(ΩS) − log det Ω + penalty(Ω)` over positive definite `Ω`.
//! The L1 penalty `γ Σ_{j≠k} |ω_jk|` leaves the diagonal alone and is solved by
//! blockwise coordinate descent on the covariance `W = Ω⁻¹` (graphical lasso).
//! The L2 penalty `γ Σ_{j,k} ω_jk²` has a closed form in the eigenbasis of `S`.

use serde::{Deserialize, Serialize};

use super::lasso::GramLasso;
use crate::error::{Error, Result};
use crate::matlin::{sym_eigen, Matrix, SymPosDef, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    /// `γ Σ_{j≠k} |ω_jk|`
    L1OffDiagonal,
    /// `γ Σ_{j,k} ω_jk²`
    L2All,
}

#[derive(Debug, Clone)]
pub struct PrecisionProblem<'a> {
    pub s: &'a Matrix,
    pub gamma: f64,
    pub kind: PenaltyKind,
}

impl PrecisionProblem<'_> {
    pub fn solve(&self) -> Result<SymPosDef> {
        match self.kind {
            PenaltyKind::L1OffDiagonal => Ok(glasso(self.s, self.gamma)?.omega),
            PenaltyKind::L2All => ridge_precision(self.s, self.gamma),
        }
    }

    pub fn objective(&self, omega: &SymPosDef) -> f64 {
        penalized_objective(self.s, omega, self.gamma, self.kind)
    }
}

/// `tr(ΩS) − log det Ω + penalty`.
pub fn penalized_objective(s: &Matrix, omega: &SymPosDef, gamma: f64, kind: PenaltyKind) -> f64 {
    let w = omega.matrix();
    let fit = w.component_mul(s).sum() - omega.log_det();
    let n = w.nrows();
    let pen = match kind {
        PenaltyKind::L1OffDiagonal => {
            let mut t = 0.0;
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        t += w[(i, j)].abs();
                    }
                }
            }
            t
        }
        PenaltyKind::L2All => w.norm_squared(),
    };
    fit + gamma * pen
}

/// Largest violation of the graphical-lasso stationarity conditions given
/// `Ω` and `Ω⁻¹`.
pub fn glasso_kkt_residual(s: &Matrix, omega: &Matrix, omega_inv: &Matrix, gamma: f64) -> f64 {
    let n = s.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let g = s[(i, j)] - omega_inv[(i, j)];
            let r = if i == j {
                g.abs()
            } else if omega[(i, j)] == 0.0 {
                (g.abs() - gamma).max(0.0)
            } else {
                (g + gamma * omega[(i, j)].signum()).abs()
            };
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct GlassoSettings {
    pub max_sweeps: usize,
    /// KKT tolerance relative to `max(1, max|S|)`.
    pub kkt_tol: f64,
    /// Looser tolerance accepted after `relax_after` sweeps. Near-singular
    /// `S` with a small penalty gives an `Ω` so ill-conditioned that the
    /// residual, computed through `Ω⁻¹`, has a roundoff floor above `kkt_tol`.
    /// The solver also gives up once the residual has not halved for
    /// `relax_after` sweeps.
    pub relaxed_kkt_tol: f64,
    pub relax_after: usize,
}

impl Default for GlassoSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 2_000,
            kkt_tol: 1e-9,
            relaxed_kkt_tol: 1e-7,
            relax_after: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub omega: SymPosDef,
    /// Working covariance `W ≈ Ω⁻¹` with `diag(W) = diag(S)`.
    pub covariance: Matrix,
    /// Column `j` holds the regression of variable `j` on the others.
    coefs: Matrix,
    pub sweeps: usize,
    gamma: f64,
    pub duality_gap: f64,
    pub kkt_residual: f64,
}

pub fn glasso(s: &Matrix, gamma: f64) -> Result<GlassoFit> {
    glasso_with(s, gamma, None, &GlassoSettings::default())
}

fn validate_cov(s: &Matrix) -> Result<()> {
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: (s.nrows(), s.nrows()),
            got: s.shape(),
        });
    }
    crate::matlin::ensure_finite(s)?;
    let asym = crate::matlin::asymmetry(s);
    if asym > 1e-10 * s.amax().max(1e-300) {
        return Err(Error::NonSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Graphical lasso with an unpenalized diagonal, optionally warm-started from a
/// previous fit on the same `s`.
pub fn glasso_with(
    s: &Matrix,
    gamma: f64,
    warm: Option<&GlassoFit>,
    settings: &GlassoSettings,
) -> Result<GlassoFit> {
    validate_cov(s)?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::BadGamma(gamma));
    }
    let s = crate::matlin::symmetrize(s);
    let p = s.nrows();
    if gamma == 0.0 {
        let sp = SymPosDef::new(s.clone()).map_err(|_| Error::SingularInput)?;
        let omega = sp.inverse().map_err(|_| Error::SingularInput)?;
        return Ok(GlassoFit {
            omega,
            covariance: s.clone(),
            coefs: Matrix::zeros(p, p),
            sweeps: 0,
            gamma,
            duality_gap: 0.0,
            kkt_residual: 0.0,
        });
    }
    if (0..p).any(|j| !(s[(j, j)] > 0.0)) {
        return Err(Error::SingularInput);
    }

    // Block updates keep W positive definite only from a dual-feasible start:
    // diag(W) = diag(S) and |W − S| ≤ γ off the diagonal. Both starts below
    // are convex blends that satisfy this exactly.
    let (mut w, mut coefs) = match warm {
        Some(f) if f.covariance.shape() == (p, p) && f.gamma > 0.0 => {
            let t = (1.0 - gamma / f.gamma).clamp(0.0, 1.0);
            (&f.covariance * (1.0 - t) + &s * t, f.coefs.clone())
        }
        _ => {
            let mut off = 0.0_f64;
            for j in 0..p {
                for i in 0..p {
                    if i != j {
                        off = off.max(s[(i, j)].abs());
                    }
                }
            }
            let t = if off > gamma { gamma / off } else { 1.0 };
            let diag = Matrix::from_diagonal(&s.diagonal());
            (&s * (1.0 - t) + diag * t, Matrix::zeros(p, p))
        }
    };
    let tol = settings.kkt_tol * s.amax().max(1.0);
    let relaxed = settings.relaxed_kkt_tol * s.amax().max(1.0);
    let mut best = f64::INFINITY;
    let mut last_progress = 0;
    let mut ran = 0;

    for sweep in 1..=settings.max_sweeps {
        ran = sweep;
        if p > 1 {
            for j in 0..p {
                let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
                let w11 = w.select_rows(&others).select_columns(&others);
                let s12 = Vector::from_iterator(p - 1, others.iter().map(|&k| s[(k, j)]));
                let warm_beta = Vector::from_iterator(p - 1, others.iter().map(|&k| coefs[(k, j)]));
                let sub = GramLasso::new(w11, s12)?;
                let beta = sub.solve(gamma, Some(&warm_beta))?;
                let w12 = sub.gram() * &beta;
                for (idx, &k) in others.iter().enumerate() {
                    w[(k, j)] = w12[idx];
                    w[(j, k)] = w12[idx];
                    coefs[(k, j)] = beta[idx];
                }
            }
        }
        let current = precision_from_coefs(&s, &w, &coefs).and_then(|omega| {
            let inv = omega.inverse().ok()?;
            let kkt = glasso_kkt_residual(&s, omega.matrix(), inv.matrix(), gamma);
            Some((omega, kkt))
        });
        let kkt = current.as_ref().map_or(f64::INFINITY, |c| c.1);
        if let Some((omega, kkt)) = current.filter(|&(_, k)| k <= tol || (sweep >= settings.relax_after && k <= relaxed)) {
            let duality_gap = duality_gap(&s, &omega, &w, gamma);
            return Ok(GlassoFit {
                omega,
                covariance: w,
                coefs,
                sweeps: sweep,
                gamma,
                duality_gap,
                kkt_residual: kkt,
            });
        }
        if kkt < 0.5 * best {
            best = kkt;
            last_progress = sweep;
        } else if sweep - last_progress > settings.relax_after {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "graphical lasso",
        iterations: ran,
    })
}

/// Rebuilds `Ω` column by column from the blockwise regressions:
/// `ω_jj = 1 / (s_jj − w12ᵀβ)`, `ω_{−j,j} = −β ω_jj`.
fn precision_from_coefs(s: &Matrix, w: &Matrix, coefs: &Matrix) -> Option<SymPosDef> {
    let p = s.nrows();
    let mut omega = Matrix::zeros(p, p);
    for j in 0..p {
        let mut quad = 0.0;
        for k in 0..p {
            if k != j {
                quad += w[(k, j)] * coefs[(k, j)];
            }
        }
        let denom = s[(j, j)] - quad;
        if !(denom > 0.0) {
            return None;
        }
        let diag = 1.0 / denom;
        omega[(j, j)] = diag;
        for k in 0..p {
            if k != j {
                omega[(k, j)] = -coefs[(k, j)] * diag;
            }
        }
    }
    for j in 0..p {
        for k in (j + 1)..p {
            let avg = 0.5 * (omega[(j, k)] + omega[(k, j)]);
            omega[(j, k)] = avg;
            omega[(k, j)] = avg;
        }
    }
    SymPosDef::new(omega).ok()
}

/// Primal objective at `Ω` minus the dual objective `log det W + p` at the
/// dual-feasible `W`.
fn duality_gap(s: &Matrix, omega: &SymPosDef, w: &Matrix, gamma: f64) -> f64 {
    let primal = penalized_objective(s, omega, gamma, PenaltyKind::L1OffDiagonal);
    match SymPosDef::new(w.clone()) {
        Ok(wp) => primal - (wp.log_det() + s.nrows() as f64),
        Err(_) => f64::INFINITY,
    }
}

/// Closed-form L2-penalized precision estimate.
///
/// Stationarity `S − Ω⁻¹ + 2γΩ = 0` decouples in the eigenbasis of `S`:
/// each eigenvalue `d` of `S` maps to the positive root of
/// `2γθ² + dθ − 1 = 0`, evaluated as `2 / (d + √(d² + 8γ))` to avoid
/// cancellation.
pub fn ridge_precision(s: &Matrix, gamma: f64) -> Result<SymPosDef> {
    validate_cov(s)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::BadGamma(gamma));
    }
    let eig = sym_eigen(s)?;
    SymPosDef::new(eig.map_values(|d| 2.0 / (d + (d * d + 8.0 * gamma).sqrt())))
}
