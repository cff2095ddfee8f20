//! Coordinate-descent lasso on a precomputed Gram matrix.

use crate::error::{Error, Result};
use crate::matlin::{cholesky, Matrix, Vector};

/// Sweep cap for coordinate descent.
pub const MAX_SWEEPS: usize = 100_000;

/// Relative coefficient-change threshold that ends a sweep loop.
pub const CHANGE_TOL: f64 = 1e-10;

/// KKT tolerance relative to `max(1, ‖b‖∞)` in the half-scaled objective.
const KKT_TOL: f64 = 1e-11;

/// Coordinate-descent sweeps tried before switching to the exact path.
const CD_BUDGET: usize = 50;

/// Path steps allowed per coordinate.
const HOMOTOPY_STEPS: usize = 20;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty {alpha} must be non-negative")));
    }
    Ok(())
}

fn chol_solve(l: &Matrix, b: &Vector) -> Option<Vector> {
    let y = l.solve_lower_triangular(b)?;
    l.tr_solve_lower_triangular(&y)
}

/// Cholesky factor of `G_AA` for an active set that grows one index at a
/// time. Row `i` of the lower factor is stored packed.
struct ActiveFactor {
    rows: Vec<Vec<f64>>,
}

impl ActiveFactor {
    fn build(gram: &Matrix, active: &[usize]) -> Option<Self> {
        let mut f = Self {
            rows: Vec::with_capacity(active.len()),
        };
        for k in 0..active.len() {
            if !f.push(gram, &active[..k], active[k]) {
                return None;
            }
        }
        Some(f)
    }

    /// Extends the factor by index `j`, given the indices already in it.
    /// Uses the same pivot floor as [`cholesky`]; `false` when it fails.
    fn push(&mut self, gram: &Matrix, active: &[usize], j: usize) -> bool {
        let k = self.rows.len();
        let mut row = Vec::with_capacity(k + 1);
        for (i, ri) in self.rows.iter().enumerate() {
            let dot: f64 = ri[..i].iter().zip(&row).map(|(x, y)| x * y).sum();
            row.push((gram[(active[i], j)] - dot) / ri[i]);
        }
        let gjj = gram[(j, j)];
        let d = gjj - row.iter().map(|x| x * x).sum::<f64>();
        if !(d > (k + 1) as f64 * f64::EPSILON * gjj) {
            return false;
        }
        row.push(d.sqrt());
        self.rows.push(row);
        true
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.rows.len();
        let mut y = b.to_vec();
        for i in 0..k {
            let r = &self.rows[i];
            let dot: f64 = r[..i].iter().zip(&y).map(|(x, y)| x * y).sum();
            y[i] = (y[i] - dot) / r[i];
        }
        for i in (0..k).rev() {
            let mut v = y[i];
            for t in (i + 1)..k {
                v -= self.rows[t][i] * y[t];
            }
            y[i] = v / self.rows[i][i];
        }
        y
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimizes `½ cᵀGc − bᵀc + α‖c‖₁` for a positive semidefinite `G`.
///
/// The least-squares lasso `‖t − Dc‖² + λ‖c‖₁` is the case `G = DᵀD`,
/// `b = Dᵀt`, `α = λ / 2`.
#[derive(Debug, Clone)]
pub struct GramLasso {
    gram: Matrix,
    rhs: Vector,
}

impl GramLasso {
    pub fn new(gram: Matrix, rhs: Vector) -> Result<Self> {
        if !gram.is_square() || gram.nrows() != rhs.len() {
            return Err(Error::ShapeMismatch {
                expected: (rhs.len(), rhs.len()),
                got: gram.shape(),
            });
        }
        Ok(Self { gram, rhs })
    }

    /// Builds the Gram form of `‖target − design·c‖²`.
    pub fn from_design(design: &Matrix, target: &Vector) -> Result<Self> {
        if design.nrows() != target.len() {
            return Err(Error::ShapeMismatch {
                expected: (target.len(), design.ncols()),
                got: design.shape(),
            });
        }
        Self::new(design.transpose() * design, design.transpose() * target)
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }

    /// `b − Gc`.
    pub fn residual_gradient(&self, coef: &Vector) -> Vector {
        &self.rhs - &self.gram * coef
    }

    /// Largest violation of the subgradient optimality conditions.
    pub fn kkt_violation(&self, coef: &Vector, alpha: f64) -> f64 {
        let g = self.residual_gradient(coef);
        kkt_violation(&g, coef, alpha)
    }

    /// Smallest `α` for which the zero vector is optimal.
    pub fn alpha_max(&self) -> f64 {
        self.rhs.amax()
    }

    pub fn solve(&self, alpha: f64, warm: Option<&Vector>) -> Result<Vector> {
        check_alpha(alpha)?;
        let q = self.dim();
        if q == 0 {
            return Ok(Vector::zeros(0));
        }
        if alpha >= self.alpha_max() {
            return Ok(Vector::zeros(q));
        }
        let tol = self.kkt_tol();
        let start = match warm {
            Some(w) if w.len() == q => w.clone(),
            _ => Vector::zeros(q),
        };
        // Coordinate descent is cheapest from a good warm start; on badly
        // conditioned problems it stalls, and the exact path takes over.
        let stalled = match self.coordinate_descent(alpha, start, CD_BUDGET, tol) {
            Ok(c) => return Ok(c),
            Err(c) => c,
        };
        let restart = match self.homotopy(&[alpha]).pop().flatten() {
            Some(c) if self.kkt_violation(&c, alpha) <= tol => return Ok(c),
            Some(c) => c,
            None => stalled,
        };
        self.coordinate_descent(alpha, restart, MAX_SWEEPS - CD_BUDGET, tol)
            .map_err(|_| Error::NoConvergence {
                what: "lasso coordinate descent",
                iterations: MAX_SWEEPS,
            })
    }

    /// Solutions at every penalty in `alphas`, which must be sorted in
    /// decreasing order. One pass of the exact path serves the whole grid;
    /// points where it is numerically off are finished by [`Self::solve`].
    pub fn solve_path(&self, alphas: &[f64]) -> Vec<Result<Vector>> {
        if let Some(bad) = alphas.iter().find(|a| check_alpha(**a).is_err()) {
            return vec![check_alpha(*bad).map(|_| Vector::zeros(0)); alphas.len()];
        }
        debug_assert!(alphas.windows(2).all(|w| w[0] >= w[1]));
        let tol = self.kkt_tol();
        let exact = self.homotopy(alphas);
        let mut prev: Option<Vector> = None;
        alphas
            .iter()
            .zip(exact)
            .map(|(&alpha, c)| {
                let out = match c {
                    Some(c) if self.kkt_violation(&c, alpha) <= tol => Ok(c),
                    Some(c) => self.solve(alpha, Some(&c)),
                    None => self.solve(alpha, prev.as_ref()),
                };
                if let Ok(c) = &out {
                    prev = Some(c.clone());
                }
                out
            })
            .collect()
    }

    fn kkt_tol(&self) -> f64 {
        KKT_TOL * self.rhs.amax().max(1.0)
    }

    /// Cyclic coordinate descent from `coef`. `Err` carries the last iterate
    /// when `sweeps` run out.
    fn coordinate_descent(
        &self,
        alpha: f64,
        mut coef: Vector,
        sweeps: usize,
        kkt_tol: f64,
    ) -> std::result::Result<Vector, Vector> {
        let q = self.dim();
        let mut grad = self.residual_gradient(&coef);
        let mut last_support: Vec<i8> = signs(&coef);
        let mut polished_support: Option<Vec<i8>> = None;

        for _ in 0..sweeps {
            let mut max_change = 0.0_f64;
            for m in 0..q {
                let gmm = self.gram[(m, m)];
                let old = coef[m];
                let new = if gmm > 0.0 {
                    soft_threshold(grad[m] + gmm * old, alpha) / gmm
                } else {
                    0.0
                };
                if new != old {
                    let delta = new - old;
                    grad.axpy(-delta, &self.gram.column(m), 1.0);
                    coef[m] = new;
                    max_change = max_change.max(delta.abs());
                }
            }

            let support = signs(&coef);
            if max_change <= CHANGE_TOL * (1.0 + coef.amax()) {
                grad = self.residual_gradient(&coef);
                if kkt_violation(&grad, &coef, alpha) <= kkt_tol {
                    return Ok(coef);
                }
            }
            // Once the signed support settles, solve the active system exactly
            // and keep the result if it satisfies every optimality condition.
            if support == last_support && polished_support.as_ref() != Some(&support) {
                if let Some(exact) = self.polish(&support, alpha, kkt_tol) {
                    return Ok(exact);
                }
                polished_support = Some(support.clone());
            }
            last_support = support;
        }
        Err(coef)
    }

    /// Follows the piecewise-linear solution path from `alpha_max` down
    /// through each target in `alphas` (decreasing). On a fixed signed active
    /// set `A` the solution is `c_A(α) = G_AA⁻¹ b_A − α G_AA⁻¹ s_A`; the path
    /// bends where an inactive gradient reaches `±α` or an active coefficient
    /// reaches zero. Entries are `None` once the active Gram block becomes
    /// numerically singular.
    fn homotopy(&self, alphas: &[f64]) -> Vec<Option<Vector>> {
        let q = self.dim();
        let mut out = Vec::with_capacity(alphas.len());
        let mut alpha = self.alpha_max();
        let mut next = 0;
        while next < alphas.len() && alphas[next] >= alpha {
            out.push(Some(Vector::zeros(q)));
            next += 1;
        }
        if next == alphas.len() {
            return out;
        }
        let eps = 1e-12 * alpha.max(1e-300);
        let lead = self.rhs.iamax();
        let mut active: Vec<usize> = vec![lead];
        let mut sign: Vec<f64> = vec![self.rhs[lead].signum()];

        let Some(mut factor) = ActiveFactor::build(&self.gram, &active) else {
            out.resize(alphas.len(), None);
            return out;
        };

        for _ in 0..HOMOTOPY_STEPS * q.max(1) {
            let b_a: Vec<f64> = active.iter().map(|&m| self.rhs[m]).collect();
            let u = factor.solve(&b_a);
            let v = factor.solve(&sign);
            let mut event_alpha = 0.0;
            let mut event: Option<(bool, usize)> = None;
            for (k, (&uk, &vk)) in u.iter().zip(v.iter()).enumerate() {
                if vk != 0.0 {
                    let a = uk / vk;
                    if a > event_alpha && a < alpha - eps {
                        event_alpha = a;
                        event = Some((false, k));
                    }
                }
            }
            let mut r = self.rhs.clone();
            let mut w = Vector::zeros(q);
            for (k, &m) in active.iter().enumerate() {
                let col = self.gram.column(m);
                r.axpy(-u[k], &col, 1.0);
                w.axpy(v[k], &col, 1.0);
            }
            for j in 0..q {
                if active.contains(&j) {
                    continue;
                }
                for (target, denom) in [(r[j], 1.0 - w[j]), (-r[j], 1.0 + w[j])] {
                    if denom != 0.0 {
                        let a = target / denom;
                        if a > event_alpha && a < alpha - eps {
                            event_alpha = a;
                            event = Some((true, j));
                        }
                    }
                }
            }

            while next < alphas.len() && alphas[next] >= event_alpha {
                let mut c = Vector::zeros(q);
                for (k, &m) in active.iter().enumerate() {
                    c[m] = u[k] - alphas[next] * v[k];
                }
                out.push(Some(c));
                next += 1;
            }
            match event {
                _ if next == alphas.len() => return out,
                None => break,
                Some((true, j)) => {
                    let g = r[j] + event_alpha * w[j];
                    if !factor.push(&self.gram, &active, j) {
                        break;
                    }
                    active.push(j);
                    sign.push(g.signum());
                }
                Some((false, k)) => {
                    active.remove(k);
                    sign.remove(k);
                    match ActiveFactor::build(&self.gram, &active) {
                        Some(f) => factor = f,
                        None => break,
                    }
                }
            }
            alpha = event_alpha;
            if active.is_empty() {
                break;
            }
        }
        out.resize(alphas.len(), None);
        out
    }

    fn polish(&self, support: &[i8], alpha: f64, kkt_tol: f64) -> Option<Vector> {
        let active: Vec<usize> = (0..support.len()).filter(|&m| support[m] != 0).collect();
        if active.is_empty() {
            return None;
        }
        let g_aa = self.gram.select_rows(&active).select_columns(&active);
        let l = cholesky(&g_aa).ok()?;
        let rhs = Vector::from_iterator(
            active.len(),
            active.iter().map(|&m| self.rhs[m] - alpha * f64::from(support[m])),
        );
        let x = chol_solve(&l, &rhs)?;
        let mut coef = Vector::zeros(self.dim());
        for (k, &m) in active.iter().enumerate() {
            if x[k] == 0.0 || x[k].signum() != f64::from(support[m]) {
                return None;
            }
            coef[m] = x[k];
        }
        (self.kkt_violation(&coef, alpha) <= kkt_tol).then_some(coef)
    }
}

fn signs(v: &Vector) -> Vec<i8> {
    v.iter()
        .map(|x| {
            if *x > 0.0 {
                1
            } else if *x < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Subgradient residual for `½ cᵀGc − bᵀc + α‖c‖₁` given `grad = b − Gc`.
pub fn kkt_violation(grad: &Vector, coef: &Vector, alpha: f64) -> f64 {
    grad.iter()
        .zip(coef.iter())
        .map(|(g, c)| {
            if *c == 0.0 {
                (g.abs() - alpha).max(0.0)
            } else {
                (g - alpha * c.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// One column of the inverse regression: `‖target − design·c‖² + λ‖c‖₁`.
///
/// The objective carries no `1/2` or `1/n` factor.
#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    pub design: &'a Matrix,
    pub target: &'a Vector,
    pub lambda: f64,
}

impl LassoProblem<'_> {
    pub fn objective(&self, coef: &Vector) -> f64 {
        (self.target - self.design * coef).norm_squared() + self.lambda * coef.lp_norm(1)
    }

    pub fn solve(&self) -> Result<Vector> {
        lasso_column(self.design, self.target, self.lambda)
    }
}

pub fn lasso_column(design: &Matrix, target: &Vector, lambda: f64) -> Result<Vector> {
    if design.ncols() == 0 {
        return Err(Error::InvalidArgument("lasso design has no columns".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lasso penalty {lambda} is negative")));
    }
    GramLasso::from_design(design, target)?.solve(lambda / 2.0, None)
}
