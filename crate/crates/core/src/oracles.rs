//! Reference solvers for verification.
//!
//! Each routine here solves one of the crate's optimization problems by a
//! different method from the production code path (enumeration, proximal
//! gradient, alternating least squares) and relies only on nalgebra's own
//! factorizations.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Matrix = DMatrix<f64>;
type Vector = DVector<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `AAᵀ + I` for a Gaussian `A`.
pub fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a = gaussian(dim, dim, rng);
    &a * a.transpose() + Matrix::identity(dim, dim)
}

fn log_det_pd(m: &Matrix) -> Option<f64> {
    let ch = m.clone().cholesky()?;
    Some(2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Solves `‖t − Dc‖² + λ‖c‖₁` by enumerating every sign pattern in
/// `{−1, 0, +1}^q`, solving the stationarity system on each, and keeping the
/// best pattern whose solution satisfies all optimality conditions.
pub fn lasso_by_sign_enumeration(design: &Matrix, target: &Vector, lambda: f64) -> Option<Vector> {
    let q = design.ncols();
    let gram = design.transpose() * design;
    let b = design.transpose() * target;
    let objective = |c: &Vector| (target - design * c).norm_squared() + lambda * c.lp_norm(1);
    let mut best: Option<(f64, Vector)> = None;
    for code in 0..3usize.pow(q as u32) {
        let mut pattern = vec![0i8; q];
        let mut rest = code;
        for s in pattern.iter_mut() {
            *s = (rest % 3) as i8 - 1;
            rest /= 3;
        }
        let active: Vec<usize> = (0..q).filter(|&m| pattern[m] != 0).collect();
        let mut coef = Vector::zeros(q);
        if !active.is_empty() {
            let g_aa = gram.select_rows(&active).select_columns(&active);
            let rhs = Vector::from_iterator(
                active.len(),
                active.iter().map(|&m| b[m] - 0.5 * lambda * f64::from(pattern[m])),
            );
            let Some(sol) = g_aa.lu().solve(&rhs) else {
                continue;
            };
            if active
                .iter()
                .enumerate()
                .any(|(k, &m)| sol[k] == 0.0 || sol[k].signum() != f64::from(pattern[m]))
            {
                continue;
            }
            for (k, &m) in active.iter().enumerate() {
                coef[m] = sol[k];
            }
        }
        let grad = (&b - &gram * &coef) * 2.0;
        let slack = 1e-9 * (1.0 + lambda + b.amax());
        if (0..q).any(|m| pattern[m] == 0 && grad[m].abs() > lambda + slack) {
            continue;
        }
        let val = objective(&coef);
        if best.as_ref().is_none_or(|(v, _)| val < *v) {
            best = Some((val, coef));
        }
    }
    best.map(|(_, c)| c)
}

/// `tr(ΩS) − log det Ω + γ Σ_{j≠k} |ω_jk|`, or `+∞` off the PD cone.
pub fn glasso_objective(s: &Matrix, omega: &Matrix, gamma: f64) -> f64 {
    let Some(ld) = log_det_pd(omega) else {
        return f64::INFINITY;
    };
    let n = s.nrows();
    let mut off = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                off += omega[(i, j)].abs();
            }
        }
    }
    (omega.component_mul(s)).sum() - ld + gamma * off
}

/// Proximal gradient with backtracking for the graphical lasso with an
/// unpenalized diagonal.
pub fn glasso_by_proximal_gradient(s: &Matrix, gamma: f64, max_iter: usize) -> Matrix {
    let n = s.nrows();
    let smooth = |m: &Matrix| -> f64 {
        match log_det_pd(m) {
            Some(ld) => m.component_mul(s).sum() - ld,
            None => f64::INFINITY,
        }
    };
    let mut omega = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 / s[(i, i)] } else { 0.0 });
    let mut step = 1.0;
    for _ in 0..max_iter {
        let inv = omega.clone().try_inverse().expect("iterate stays positive definite");
        let grad = s - &inv;
        let f_old = smooth(&omega);
        let moved;
        loop {
            let mut cand = &omega - &grad * step;
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        let v = cand[(i, j)];
                        cand[(i, j)] = v.signum() * (v.abs() - step * gamma).max(0.0);
                    }
                }
            }
            cand = (&cand + cand.transpose()) * 0.5;
            let diff = &cand - &omega;
            let f_new = smooth(&cand);
            if f_new.is_finite()
                && f_new <= f_old + grad.component_mul(&diff).sum() + diff.norm_squared() / (2.0 * step)
            {
                moved = diff.amax();
                omega = cand;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return omega;
            }
        }
        if moved < 1e-15 {
            break;
        }
        step = (step * 1.5).min(1e6);
    }
    omega
}

/// Profiled Gaussian objective of a coefficient matrix:
/// `min_Ω n⁻¹ tr(EᵀE Ω) − log det Ω = b + log det(EᵀE / n)`.
pub fn rrr_profiled_objective(design: &Matrix, response: &Matrix, coef: &Matrix) -> f64 {
    let n = design.nrows() as f64;
    let e = response - design * coef;
    let cov = e.transpose() * &e / n;
    response.ncols() as f64 + log_det_pd(&((&cov + cov.transpose()) * 0.5)).unwrap_or(f64::INFINITY)
}

/// Best objective found by alternating minimization of the rank-`r` Gaussian
/// likelihood over `coef = A·B` and `Ω`, from `restarts` random starts.
pub fn rrr_by_alternating(design: &Matrix, response: &Matrix, r: usize, restarts: usize, seed: u64) -> f64 {
    let (a, b) = (design.ncols(), response.ncols());
    let n = design.nrows() as f64;
    if r == 0 {
        return rrr_profiled_objective(design, response, &Matrix::zeros(a, b));
    }
    let dtd_inv = (design.transpose() * design).try_inverse().expect("design has full column rank");
    let dtr = design.transpose() * response;
    let mut rng = rng(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut left = gaussian(a, r, &mut rng);
        let mut omega = Matrix::identity(b, b);
        let mut prev = f64::INFINITY;
        for _ in 0..5_000 {
            let f = design * &left;
            let Some(ftf_inv) = (f.transpose() * &f).try_inverse() else {
                break;
            };
            let right = ftf_inv * f.transpose() * response;
            let bob = &right * &omega * right.transpose();
            let Some(bob_inv) = bob.try_inverse() else {
                break;
            };
            left = &dtd_inv * &dtr * &omega * right.transpose() * bob_inv;
            let coef = &left * &right;
            let e = response - design * &coef;
            let cov = e.transpose() * &e / n;
            let Some(inv) = ((&cov + cov.transpose()) * 0.5).try_inverse() else {
                break;
            };
            omega = inv;
            let obj = rrr_profiled_objective(design, response, &coef);
            if (prev - obj).abs() <= 1e-14 * (1.0 + obj.abs()) {
                prev = obj;
                break;
            }
            prev = obj;
        }
        best = best.min(prev);
    }
    best
}
