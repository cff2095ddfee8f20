//! K-fold cross-validation for lasso penalties, ridge penalties, precision
//! penalties and reduced-rank ranks.
//!
//! Every held-out block is centered by the means of its training rows.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{Matrix, Vector};
use crate::rrr::RrrPath;
use crate::simgen::{column_means, rng_from_seed, sweep_rows, Dataset};
use crate::sparse_est::{glasso_with, ridge_precision, GlassoFit, GlassoSettings, GramLasso, PenaltyKind};

pub const DEFAULT_FOLDS: usize = 5;

/// Candidate tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    values: Vec<f64>,
}

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("tuning grid is empty".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("tuning grid values must be finite and non-negative".into()));
        }
        Ok(Self { values })
    }

    /// `10^{-8}, 10^{-7.5}, …, 10^{8}`.
    pub fn log_spaced() -> Self {
        Self {
            values: (0..=32).map(|k| 10f64.powf(-8.0 + 0.5 * k as f64)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices ordered by decreasing value, for warm-started sweeps.
    fn descending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::log_spaced()
    }
}

/// A seeded random partition of `0..n` into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Fold index of each observation.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Rows held out in fold `f`.
    pub fn validation(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Rows used for fitting when fold `f` is held out.
    pub fn training(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::BadK { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { n, k, seed, assignment })
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection<T> {
    pub value: T,
    pub index: usize,
    /// Total CV score per candidate, `+∞` where a fit failed.
    pub scores: Vec<f64>,
    /// The winner is the first or last candidate of an ordered grid.
    pub at_endpoint: bool,
}

/// Argmin of `scores`; among exact ties the candidate ranked first by
/// `prefer` wins.
fn select<T: Copy>(
    candidates: &[T],
    scores: Vec<f64>,
    prefer: impl Fn(&T, &T) -> std::cmp::Ordering,
    endpoint: impl Fn(usize) -> bool,
) -> Result<Selection<T>> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) if *s < scores[b] => Some(i),
            Some(b) if *s == scores[b] && prefer(&candidates[i], &candidates[b]).is_lt() => Some(i),
            keep => keep,
        };
    }
    let index = best.ok_or_else(|| Error::InvalidArgument("every tuning candidate failed to fit".into()))?;
    Ok(Selection {
        value: candidates[index],
        index,
        scores,
        at_endpoint: endpoint(index),
    })
}

fn select_penalty(grid: &Grid, scores: Vec<f64>) -> Result<Selection<f64>> {
    let vals = grid.values();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    select(vals, scores, |a, b| b.total_cmp(a), |i| vals.len() > 1 && (vals[i] == lo || vals[i] == hi))
}

/// Training and validation blocks of one fold, both centered by the
/// training means.
struct FoldBlocks {
    train: Matrix,
    valid: Matrix,
}

fn fold_blocks(a: &Matrix, plan: &FoldPlan, f: usize) -> FoldBlocks {
    let train = a.select_rows(&plan.training(f));
    let valid = a.select_rows(&plan.validation(f));
    let mean = column_means(&train);
    FoldBlocks {
        train: sweep_rows(&train, &mean),
        valid: sweep_rows(&valid, &mean),
    }
}

fn check_plan(plan: &FoldPlan, n: usize) -> Result<()> {
    if plan.n != n {
        return Err(Error::InvalidArgument(format!(
            "fold plan covers {} rows, data has {n}",
            plan.n
        )));
    }
    Ok(())
}

/// Per-column lasso CV: column `j` of `targets` is regressed on `design` and
/// its penalty chosen by total held-out squared error. Columns never interact;
/// only the fold Gram matrices of `design` are shared.
pub fn cv_lasso_columns(
    design: &Matrix,
    targets: &Matrix,
    grid: &Grid,
    plan: &FoldPlan,
) -> Result<Vec<Selection<f64>>> {
    check_plan(plan, design.nrows())?;
    let folds: Vec<(FoldBlocks, FoldBlocks, Matrix)> = (0..plan.k)
        .map(|f| {
            let d = fold_blocks(design, plan, f);
            let t = fold_blocks(targets, plan, f);
            let gram = d.train.transpose() * &d.train;
            (d, t, gram)
        })
        .collect();
    let order = grid.descending();
    let alphas: Vec<f64> = order.iter().map(|&g| grid.values()[g] / 2.0).collect();
    (0..targets.ncols())
        .map(|j| {
            let mut scores = vec![0.0_f64; grid.len()];
            for (d, t, gram) in &folds {
                let rhs = d.train.transpose() * t.train.column(j);
                let solver = GramLasso::new(gram.clone(), rhs)?;
                let target = t.valid.column(j);
                for (&g, fit) in order.iter().zip(solver.solve_path(&alphas)) {
                    match fit {
                        Ok(c) => scores[g] += (target - &d.valid * &c).norm_squared(),
                        Err(_) => scores[g] = f64::INFINITY,
                    }
                }
            }
            select_penalty(grid, scores)
        })
        .collect()
}

/// Lasso CV for a single target column.
pub fn cv_lasso_lambda(design: &Matrix, target: &Vector, grid: &Grid, plan: &FoldPlan) -> Result<Selection<f64>> {
    let t = Matrix::from_column_slice(target.len(), 1, target.as_slice());
    Ok(cv_lasso_columns(design, &t, grid, plan)?.remove(0))
}

/// Which ridge penalty structure to tune.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeTuning {
    /// One penalty, scored on the total error over all responses.
    Shared,
    /// One penalty per response, each scored on its own column.
    PerResponse,
}

/// Ridge CV on the forward regression. Returns one selection, or one per
/// response.
pub fn cv_ridge(data: &Dataset, grid: &Grid, plan: &FoldPlan, mode: RidgeTuning) -> Result<Vec<Selection<f64>>> {
    check_plan(plan, data.n())?;
    let (p, q) = (data.p(), data.q());
    let mut per_col = vec![vec![0.0; grid.len()]; q];
    for f in 0..plan.k {
        let x = fold_blocks(&data.x_centered, plan, f);
        let y = fold_blocks(&data.y_centered, plan, f);
        let gram = x.train.transpose() * &x.train;
        let cross = x.train.transpose() * &y.train;
        for (g, &lambda) in grid.values().iter().enumerate() {
            let system = &gram + Matrix::identity(p, p) * lambda;
            match crate::matlin::SymPosDef::new(system) {
                Ok(spd) => {
                    let resid = &y.valid - &x.valid * spd.solve(&cross);
                    for (m, col) in per_col.iter_mut().enumerate() {
                        col[g] += resid.column(m).norm_squared();
                    }
                }
                Err(_) => {
                    for col in per_col.iter_mut() {
                        col[g] = f64::INFINITY;
                    }
                }
            }
        }
    }
    match mode {
        RidgeTuning::Shared => {
            let total = (0..grid.len()).map(|g| per_col.iter().map(|c| c[g]).sum()).collect();
            Ok(vec![select_penalty(grid, total)?])
        }
        RidgeTuning::PerResponse => per_col.into_iter().map(|s| select_penalty(grid, s)).collect(),
    }
}

/// `tr(Ω S_valid) − log det Ω`, the held-out negative log-likelihood.
pub fn validation_score(omega: &crate::matlin::SymPosDef, s_valid: &Matrix) -> f64 {
    omega.matrix().component_mul(s_valid).sum() - omega.log_det()
}

/// Fold covariances `(S_(−k), S_(k))` of the rows of `obs`, both centered by
/// the training-fold mean and scaled by their own row counts.
pub fn fold_covariances(obs: &Matrix, plan: &FoldPlan, f: usize) -> (Matrix, Matrix) {
    let b = fold_blocks(obs, plan, f);
    let cov = |m: &Matrix| crate::matlin::symmetrize(&(m.transpose() * m / m.nrows() as f64));
    (cov(&b.train), cov(&b.valid))
}

/// Validation-likelihood CV for a precision penalty.
///
/// `s_builder(f)` returns `(S_(−f), S_(f))`. Penalties are visited from largest
/// to smallest; graphical-lasso fits are warm-started along that path, and once
/// a fit fails on a fold the remaining smaller penalties score `+∞` there.
pub fn cv_validation_likelihood<F>(
    s_builder: F,
    grid: &Grid,
    plan: &FoldPlan,
    kind: PenaltyKind,
    settings: &GlassoSettings,
) -> Result<Selection<f64>>
where
    F: Fn(usize) -> Result<(Matrix, Matrix)>,
{
    let order = grid.descending();
    let mut scores = vec![0.0; grid.len()];
    for f in 0..plan.k {
        let (s_train, s_valid) = s_builder(f)?;
        let mut warm: Option<GlassoFit> = None;
        let mut failed = false;
        for &g in &order {
            if failed {
                scores[g] = f64::INFINITY;
                continue;
            }
            let gamma = grid.values()[g];
            let omega = match kind {
                PenaltyKind::L1OffDiagonal => match glasso_with(&s_train, gamma, warm.as_ref(), settings) {
                    Ok(fit) => {
                        let o = fit.omega.clone();
                        warm = Some(fit);
                        Ok(o)
                    }
                    Err(e) => Err(e),
                },
                PenaltyKind::L2All => ridge_precision(&s_train, gamma),
            };
            match omega {
                Ok(o) => scores[g] += validation_score(&o, &s_valid),
                Err(_) => {
                    scores[g] = f64::INFINITY;
                    failed = kind == PenaltyKind::L1OffDiagonal;
                }
            }
        }
    }
    select_penalty(grid, scores)
}

/// Validation-likelihood CV on the rows of `obs`.
pub fn cv_precision(
    obs: &Matrix,
    grid: &Grid,
    plan: &FoldPlan,
    kind: PenaltyKind,
    settings: &GlassoSettings,
) -> Result<Selection<f64>> {
    check_plan(plan, obs.nrows())?;
    cv_validation_likelihood(|f| Ok(fold_covariances(obs, plan, f)), grid, plan, kind, settings)
}

/// Regression direction for rank selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `X` on `Y`.
    Inverse,
    /// `Y` on `X`.
    Forward,
}

/// Rank in `0..=min(p, q)` minimizing total held-out squared error of the
/// reduced-rank fit. Folds whose training block cannot support a fit score
/// every rank as `+∞`.
pub fn cv_rank(data: &Dataset, orientation: Orientation, plan: &FoldPlan) -> Result<Selection<usize>> {
    check_plan(plan, data.n())?;
    let (design, response) = match orientation {
        Orientation::Inverse => (&data.y_centered, &data.x_centered),
        Orientation::Forward => (&data.x_centered, &data.y_centered),
    };
    let max = data.p().min(data.q());
    let ranks: Vec<usize> = (0..=max).collect();
    let mut scores = vec![0.0; ranks.len()];
    for f in 0..plan.k {
        let d = fold_blocks(design, plan, f);
        let r = fold_blocks(response, plan, f);
        match RrrPath::new(&d.train, &r.train) {
            Ok(path) => {
                for &rank in &ranks {
                    scores[rank] += (&r.valid - &d.valid * path.coef(rank)?).norm_squared();
                }
            }
            Err(_) => scores.iter_mut().for_each(|s| *s = f64::INFINITY),
        }
    }
    select(&ranks, scores, |a, b| a.cmp(b), |i| max > 0 && (i == 0 || i == max))
}
