use super::*;
use crate::matlin::{cross_cov, sym_eigen, Vector};
use crate::oracles::{
    gaussian, glasso_by_proximal_gradient, glasso_objective, lasso_by_sign_enumeration, random_spd,
    rng,
};
use crate::simgen::center;
use proptest::prelude::*;
use rand::Rng;

fn dataset(x: Matrix, y: Matrix) -> Dataset {
    center(&x, &y).unwrap()
}

#[test]
fn lasso_zero_penalty_is_least_squares() {
    let mut r = rng(1);
    let d = gaussian(30, 4, &mut r);
    let t = gaussian(30, 1, &mut r).column(0).into_owned();
    let c = lasso_column(&d, &t, 0.0).unwrap();
    let ls = (d.transpose() * &d).lu().solve(&(d.transpose() * &t)).unwrap();
    assert!((c - ls).amax() < 1e-9);
}

#[test]
fn lasso_large_penalty_is_zero() {
    let mut r = rng(2);
    let d = gaussian(20, 5, &mut r);
    let t = gaussian(20, 1, &mut r).column(0).into_owned();
    let threshold = 2.0 * (d.transpose() * &t).amax();
    assert_eq!(lasso_column(&d, &t, threshold).unwrap(), Vector::zeros(5));
    assert_eq!(lasso_column(&d, &t, 10.0 * threshold).unwrap(), Vector::zeros(5));
    assert!(lasso_column(&d, &t, 0.99 * threshold).unwrap().amax() > 0.0);
}

#[test]
fn lasso_matches_sign_enumeration() {
    let mut r = rng(3);
    for case in 0..25 {
        let d = gaussian(6, 2, &mut r);
        let t = gaussian(6, 1, &mut r).column(0).into_owned();
        let lambda = 0.5 * case as f64 / 5.0;
        let c = lasso_column(&d, &t, lambda).unwrap();
        let oracle = lasso_by_sign_enumeration(&d, &t, lambda).unwrap();
        assert!((&c - &oracle).amax() <= 1e-8, "case {case}: {c} vs {oracle}");
    }
}

#[test]
fn lasso_kkt_contract() {
    let mut r = rng(4);
    for _ in 0..50 {
        let d = gaussian(25, 8, &mut r);
        let t = gaussian(25, 1, &mut r).column(0).into_owned();
        let lambda = 3.0 * r.random::<f64>();
        let c = lasso_column(&d, &t, lambda).unwrap();
        let grad = d.transpose() * (&t - &d * &c) * 2.0;
        for m in 0..8 {
            if c[m] == 0.0 {
                assert!(grad[m].abs() <= lambda + 1e-8);
            } else {
                assert!((grad[m] - lambda * c[m].signum()).abs() <= 1e-8);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lasso_is_locally_optimal(seed in 0u64..10_000, lambda in 0.0f64..5.0) {
        let mut r = rng(seed);
        let d = gaussian(12, 4, &mut r);
        let t = gaussian(12, 1, &mut r).column(0).into_owned();
        let prob = LassoProblem { design: &d, target: &t, lambda };
        let c = prob.solve().unwrap();
        let base = prob.objective(&c);
        for m in 0..4 {
            for delta in [-1e-4, 1e-4] {
                let mut moved = c.clone();
                moved[m] += delta;
                prop_assert!(prob.objective(&moved) >= base - 1e-12);
            }
        }
    }
}

#[test]
fn eta_lasso_limits() {
    let mut r = rng(5);
    let y = gaussian(40, 3, &mut r);
    let x = &y * gaussian(3, 4, &mut r) + gaussian(40, 4, &mut r);
    let data = dataset(x, y);
    assert_eq!(eta_lasso(&data, &[1e12; 4]).unwrap(), Matrix::zeros(3, 4));

    let eta = eta_lasso(&data, &[0.0; 4]).unwrap();
    let yty = data.y_centered.transpose() * &data.y_centered;
    let ls = yty.lu().solve(&(data.y_centered.transpose() * &data.x_centered)).unwrap();
    assert!((eta - ls).amax() < 1e-9);
}

#[test]
fn eta_lasso_permutation_equivariance() {
    let mut r = rng(6);
    let y = gaussian(30, 3, &mut r);
    let x = &y * gaussian(3, 5, &mut r) + gaussian(30, 5, &mut r);
    let data = dataset(x.clone(), y.clone());
    let lambdas = [1.0, 5.0, 0.3, 10.0, 2.0];
    let eta = eta_lasso(&data, &lambdas).unwrap();
    let perm = [3usize, 0, 4, 2, 1];
    let permuted = dataset(x.select_columns(&perm), y);
    let plambdas: Vec<f64> = perm.iter().map(|&j| lambdas[j]).collect();
    let eta_p = eta_lasso(&permuted, &plambdas).unwrap();
    assert!((eta_p - eta.select_columns(&perm)).amax() < 1e-12);
}

#[test]
fn lasso_forward_cases() {
    let mut r = rng(7);
    let x = gaussian(30, 3, &mut r);
    let y = &x * gaussian(3, 2, &mut r) + gaussian(30, 2, &mut r) * 0.5;
    let data = dataset(x, y);
    assert_eq!(lasso_forward(&data, &[1e12, 1e12]).unwrap(), Matrix::zeros(3, 2));
    let unpenalized = lasso_forward(&data, &[0.0, 0.0]).unwrap();
    assert!((unpenalized - ols(&data).unwrap()).amax() < 1e-9);

    let small = dataset(gaussian(8, 3, &mut r), gaussian(8, 1, &mut r));
    let fit = lasso_forward(&small, &[0.7]).unwrap();
    let oracle =
        lasso_by_sign_enumeration(&small.x_centered, &small.y_centered.column(0).into_owned(), 0.7)
            .unwrap();
    assert!((fit.column(0) - oracle).amax() <= 1e-8);
}

#[test]
fn glasso_unpenalized_is_inverse() {
    let mut r = rng(8);
    let s = random_spd(5, &mut r);
    let fit = glasso(&s, 0.0).unwrap();
    let inv = s.clone().try_inverse().unwrap();
    assert!((fit.omega.matrix() - inv).amax() < 1e-6);
}

#[test]
fn glasso_singular_without_penalty_fails() {
    let v = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
    let s = &v * v.transpose();
    assert!(matches!(glasso(&s, 0.0), Err(crate::Error::SingularInput)));
}

#[test]
fn glasso_diagonal_input_is_fixed_point() {
    let s = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 0.5, 4.0]));
    for gamma in [0.0, 1e-3, 0.5, 10.0] {
        let fit = glasso(&s, gamma).unwrap();
        let expected = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 2.0, 0.25]));
        assert!((fit.omega.matrix() - expected).amax() < 1e-12);
    }
}

#[test]
fn glasso_large_penalty_is_diagonal() {
    let mut r = rng(9);
    let s = cross_cov(&gaussian(50, 4, &mut r));
    let fit = glasso(&s, 1e3).unwrap();
    let expected = Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 / s[(i, i)] } else { 0.0 });
    assert!((fit.omega.matrix() - expected).amax() < 1e-12);
}

#[test]
fn glasso_matches_proximal_gradient_oracle() {
    let mut r = rng(10);
    for _ in 0..5 {
        let s = cross_cov(&gaussian(15, 3, &mut r));
        let fit = glasso(&s, 0.1).unwrap();
        assert!(fit.kkt_residual <= 1e-6);
        let reference = glasso_by_proximal_gradient(&s, 0.1, 200_000);
        let ours = glasso_objective(&s, fit.omega.matrix(), 0.1);
        let theirs = glasso_objective(&s, &reference, 0.1);
        assert!((ours - theirs).abs() <= 1e-6, "{ours} vs {theirs}");
        assert!(fit.duality_gap <= 1e-7);
    }
}

#[test]
fn glasso_is_invariant_to_sweep_order() {
    let mut r = rng(11);
    let s = cross_cov(&gaussian(30, 6, &mut r));
    let fit = glasso(&s, 0.05).unwrap();
    let perm = [4usize, 2, 5, 0, 3, 1];
    let sp = s.select_rows(&perm).select_columns(&perm);
    let fit_p = glasso(&sp, 0.05).unwrap();
    let back = fit.omega.matrix().select_rows(&perm).select_columns(&perm);
    assert!((fit_p.omega.matrix() - back).amax() < 1e-6);
}

#[test]
fn glasso_warm_start_agrees_with_cold() {
    let mut r = rng(12);
    let s = cross_cov(&gaussian(40, 5, &mut r));
    let coarse = glasso(&s, 0.3).unwrap();
    let warm = glasso_with(&s, 0.1, Some(&coarse), &GlassoSettings::default()).unwrap();
    let cold = glasso(&s, 0.1).unwrap();
    assert!((warm.omega.matrix() - cold.omega.matrix()).amax() < 1e-6);
}

fn ridge_residual(s: &Matrix, omega: &SymPosDef, gamma: f64) -> f64 {
    let inv = omega.inverse().unwrap();
    (s - inv.matrix() + omega.matrix() * (2.0 * gamma)).norm()
}

#[test]
fn ridge_precision_cases() {
    let omega = ridge_precision(&Matrix::identity(3, 3), 1.0).unwrap();
    assert!((omega.matrix() - Matrix::identity(3, 3) * 0.5).amax() < 1e-15);

    let mut r = rng(13);
    let s = random_spd(4, &mut r);
    let omega = ridge_precision(&s, 1e-12).unwrap();
    let inv = s.clone().try_inverse().unwrap();
    assert!((omega.matrix() - &inv).norm() / inv.norm() <= 1e-4);

    let low = gaussian(6, 3, &mut r);
    let singular = &low * low.transpose();
    let omega = ridge_precision(&singular, 0.5).unwrap();
    assert!(ridge_residual(&singular, &omega, 0.5) <= 1e-8);

    assert!(matches!(ridge_precision(&s, 0.0), Err(crate::Error::BadGamma(_))));
}

#[test]
fn ridge_precision_eigenvalues_decrease_with_data_eigenvalues() {
    let mut r = rng(14);
    let s = cross_cov(&gaussian(20, 5, &mut r));
    let omega = ridge_precision(&s, 0.2).unwrap();
    let es = sym_eigen(&s).unwrap();
    // Each eigenvector of S is an eigenvector of Ω̂; its eigenvalue must be
    // non-increasing along the descending eigenvalues of S.
    let theta: Vec<f64> = (0..5)
        .map(|k| {
            let v = es.vectors.column(k);
            (v.transpose() * omega.matrix() * v)[(0, 0)]
        })
        .collect();
    for k in 1..5 {
        assert!(theta[k] >= theta[k - 1]);
    }
}

#[test]
fn ridge_precision_homogeneity() {
    let mut r = rng(15);
    let s = cross_cov(&gaussian(20, 4, &mut r));
    let base = ridge_precision(&s, 0.3).unwrap();
    let c: f64 = 2.5;
    let scaled = ridge_precision(&(&s * c), 0.3 * c * c).unwrap();
    assert!((scaled.matrix() - base.matrix() / c).amax() < 1e-12);
}

#[test]
fn ridge_ls_cases() {
    let mut r = rng(16);
    let x = gaussian(30, 4, &mut r);
    let y = gaussian(30, 2, &mut r);
    let data = dataset(x, y);
    let huge = ridge_ls(&data, &RidgePenalty::Shared(1e14)).unwrap();
    assert!(huge.amax() < 1e-10);
    let zero = ridge_ls(&data, &RidgePenalty::Shared(0.0)).unwrap();
    assert!((zero - ols(&data).unwrap()).amax() < 1e-10);

    // Orthonormal columns: β̂_m = XᵀY_m / (1 + λ_m).
    let q = gaussian(12, 3, &mut r).qr().q();
    let centered_q = crate::simgen::sweep_rows(&q, &crate::simgen::column_means(&q));
    let qo = centered_q.qr().q();
    let y = gaussian(12, 2, &mut r);
    let data = Dataset {
        x_centered: qo.clone(),
        y_centered: y.clone(),
        x_mean: Vector::zeros(3),
        y_mean: Vector::zeros(2),
    };
    let fit = ridge_ls(&data, &RidgePenalty::PerResponse(vec![0.5, 3.0])).unwrap();
    let xty = qo.transpose() * &y;
    assert!((fit.column(0) - xty.column(0) / 1.5).amax() < 1e-12);
    assert!((fit.column(1) - xty.column(1) / 4.0).amax() < 1e-12);
}

#[test]
fn ridge_ls_singular_without_penalty() {
    let mut r = rng(17);
    let data = dataset(gaussian(5, 8, &mut r), gaussian(5, 2, &mut r));
    assert!(matches!(
        ridge_ls(&data, &RidgePenalty::Shared(0.0)),
        Err(crate::Error::Singular(_))
    ));
}

#[test]
fn ols_cases() {
    let mut r = rng(18);
    let x = gaussian(20, 4, &mut r);
    let b = gaussian(4, 3, &mut r);
    let data = dataset(x.clone(), &x * &b);
    assert!((ols(&data).unwrap() - &b).amax() < 1e-9);

    // n < p: minimum-norm least squares.
    let data = dataset(gaussian(6, 10, &mut r), gaussian(6, 2, &mut r));
    let beta = ols(&data).unwrap();
    let x = &data.x_centered;
    let resid = &data.y_centered - x * &beta;
    assert!((x.transpose() * resid).amax() < 1e-9);
    // Minimum norm: β lies in the row space of X.
    let proj = crate::matlin::pseudo_inverse(x).unwrap() * x;
    assert!((&proj * &beta - &beta).amax() < 1e-9);

    // q = 1 is ordinary univariate least squares.
    let x = gaussian(15, 2, &mut r);
    let y = gaussian(15, 1, &mut r);
    let data = dataset(x, y);
    let xc = &data.x_centered;
    let direct = (xc.transpose() * xc).try_inverse().unwrap() * xc.transpose() * &data.y_centered;
    assert!((ols(&data).unwrap() - direct).amax() < 1e-10);
}
