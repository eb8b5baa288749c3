//! Empirical Bayes estimation with covariates.
//!
//! Each unit `i` comes with a noisy measurement `Z_i` of an unknown mean `mu_i`,
//! a known noise standard deviation `sigma_i` and a covariate vector `X_i`.
//! The estimators in this crate shrink `Z_i` towards a regression prediction
//! `m_hat(X_i)` with a data-driven weight, fitting `m_hat` and the prior variance
//! on disjoint folds ("cross-fitting").
//!
//! Module map:
//!
//! - [`shrinkage`]: the Bayes shrinkage rule, moment and SURE estimators of the
//!   prior variance, Monte Carlo excess risk.
//! - [`regressors`]: k-NN, OLS and an external-predictions adapter behind one
//!   fit/predict contract.
//! - [`crossfit`]: fold assignment and the cross-fitted estimator.
//! - [`simulate`]: the hierarchical generative model, the Friedman benchmark and
//!   hypergeometric down-sampling.
//! - [`oracle`]: quadrature-based Bayes risk checks and estimator comparison sweeps.
//! - [`io`]: CSV formats for datasets, external predictions and risk reports.

pub mod crossfit;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod regressors;
pub mod rng;
pub mod shrinkage;
pub mod simulate;
pub mod stats;

pub use crossfit::{ebcf_fit, make_folds, sure_grand_mean_fit, EbcfFit, FoldAssignment};
pub use error::{Error, Result};
pub use regressors::{Backend, RegressionModel};
pub use shrinkage::{bayes_shrink, ExcessRiskValue, ShrinkageRule, SureObjective};
pub use simulate::{Dataset, HierarchicalSpec};
