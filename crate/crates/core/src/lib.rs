//! Indirect estimation of the coefficient matrix of a multivariate-response
//! linear regression.
//!
//! Under joint normality of predictors and responses, the forward coefficient
//! matrix `β = Σ_XX⁻¹ Σ_XY` can be rebuilt from the parameters of the inverse
//! regression of `X` on `Y`:
//!
//! ```text
//! β = Δ⁻¹ ηᵀ (Σ_YY⁻¹ + η Δ⁻¹ ηᵀ)⁻¹
//! ```
//!
//! where `η` is the inverse-regression coefficient matrix and `Δ` its error
//! covariance. Plugging shrinkage estimates of `η`, `Δ⁻¹` and `Σ_YY⁻¹` into the
//! right-hand side gives the estimators in [`indirect`].

pub mod error;
pub mod indirect;
pub mod matlin;
pub mod rrr;
pub mod simgen;
pub mod sparse_est;
pub mod tuning;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Result};
pub use matlin::{Matrix, SymPosDef, Vector};
