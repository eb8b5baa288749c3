//! Numerical oracles: Bayes risk of two-point Gaussian mixture priors via the
//! Fisher information of the marginal, and paired risk comparisons of the
//! estimators on simulated data.

mod compare;
mod mixture;

pub use compare::{compare_estimators, Estimator, EstimatorSet, RiskReport, RiskRow};
pub use mixture::{
    bayes_risk_brown, bayes_risk_mc, fisher_information_marginal, mixture_regret, MixturePrior,
    SUPPORT_HALF_WIDTH,
};
