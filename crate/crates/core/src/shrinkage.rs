//! The Bayes shrinkage rule and estimators of the prior variance `A`.
//!
//! Under `mu | X ~ N(m(X), A)` and `Z | mu ~ N(mu, sigma^2)` the posterior mean is
//!
//! ```text
//! t*_{m,A}(x, z) = A / (sigma^2 + A) * z + sigma^2 / (sigma^2 + A) * m(x)
//! ```
//!
//! `A` is selected by minimizing Stein's unbiased risk estimate over `A >= 0`;
//! with a common noise variance the minimizer is the positive-part moment
//! estimator `(mean(r_i^2) - sigma^2)_+`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::optimize::golden_section;
use crate::rng::{label, substream, StreamRng};
use crate::simulate::HierarchicalSpec;
use crate::stats::{MeanEstimate, RunningStats};

/// Relative tolerance under which noise variances count as equal.
pub const HOMOSKEDASTIC_RTOL: f64 = 1e-12;

/// Points in the coarse log-spaced scan that precedes golden-section refinement.
pub const SURE_GRID_POINTS: usize = 256;

/// `A / (sigma2 + A) * z + sigma2 / (sigma2 + A) * m_x`.
///
/// The result always lies between `z` and `m_x`; `a == 0` returns `m_x` exactly.
pub fn bayes_shrink(m_x: f64, z: f64, a: f64, sigma2: f64) -> Result<f64> {
    ensure_finite("regression prediction", m_x)?;
    ensure_finite("observation", z)?;
    ensure_finite("prior variance A", a)?;
    ensure_finite("noise variance", sigma2)?;
    if !(sigma2 > 0.0) {
        return Err(Error::domain(format!("noise variance must be > 0, got {sigma2}")));
    }
    if a < 0.0 {
        return Err(Error::domain(format!("prior variance A must be >= 0, got {a}")));
    }
    Ok(shrink_unchecked(m_x, z, a, sigma2))
}

#[inline]
pub(crate) fn shrink_unchecked(m_x: f64, z: f64, a: f64, sigma2: f64) -> f64 {
    let total = a + sigma2;
    let t = (a / total) * z + (sigma2 / total) * m_x;
    t.clamp(z.min(m_x), z.max(m_x))
}

/// Weight `sigma2 / (A + sigma2)` that the rule puts on the regression prediction.
pub fn prediction_weight(a: f64, sigma2: f64) -> f64 {
    sigma2 / (a + sigma2)
}

/// `(mean(r_i^2) - sigma2)_+`.
pub fn estimate_a_moment(residuals: &[f64], sigma2: f64) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::domain("cannot estimate A from an empty residual vector"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("noise variance must be finite and > 0, got {sigma2}")));
    }
    let mean_sq = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
    Ok((mean_sq - sigma2).max(0.0))
}

/// `A_{m~} = A + E[(m~(X) - m(X))^2]`: the risk-minimizing prior variance for a
/// plug-in rule built on an imperfect regression `m~`.
pub fn optimal_inflated_a(mse_of_regression: f64, a_true: f64) -> Result<f64> {
    for (name, v) in [("regression MSE", mse_of_regression), ("prior variance A", a_true)] {
        ensure_finite(name, v)?;
        if v < 0.0 {
            return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(a_true + mse_of_regression)
}

/// Risk `E[(t_lambda - mu)^2] = lambda^2 S - 2 lambda sigma^2 + sigma^2` of the
/// linear rule `t_lambda = lambda m~(x) + (1 - lambda) z`, where
/// `S = E[(m~(X) - Z)^2]` for a fixed regression `m~`.
pub fn linear_rule_risk(lambda: f64, mean_sq_gap: f64, sigma2: f64) -> f64 {
    lambda * lambda * mean_sq_gap - 2.0 * lambda * sigma2 + sigma2
}

/// Stein's unbiased risk estimate of the shrinkage rule as a function of `A`,
/// for fixed residuals `r_i = Z_i - m_hat(X_i)` and noise variances `sigma_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SureObjective {
    residuals: Vec<f64>,
    noise_variances: Vec<f64>,
}

impl SureObjective {
    pub fn new(residuals: Vec<f64>, noise_variances: Vec<f64>) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::domain("SURE objective needs at least one residual"));
        }
        if residuals.len() != noise_variances.len() {
            return Err(Error::domain(format!(
                "{} residuals but {} noise variances",
                residuals.len(),
                noise_variances.len()
            )));
        }
        if let Some(r) = residuals.iter().find(|r| !r.is_finite()) {
            return Err(Error::domain(format!("residual {r} is not finite")));
        }
        if let Some(v) = noise_variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("noise variance {v} is not finite and positive")));
        }
        Ok(Self {
            residuals,
            noise_variances,
        })
    }

    pub fn homoskedastic(residuals: Vec<f64>, sigma2: f64) -> Result<Self> {
        let n = residuals.len();
        Self::new(residuals, vec![sigma2; n])
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    /// The shared noise variance, if all are equal within [`HOMOSKEDASTIC_RTOL`].
    pub fn common_variance(&self) -> Option<f64> {
        let first = self.noise_variances[0];
        self.noise_variances
            .iter()
            .all(|v| (v - first).abs() <= HOMOSKEDASTIC_RTOL * first)
            .then_some(first)
    }

    /// `(1/n) sum [sigma_i^2 + sigma_i^4 / (A + sigma_i^2)^2 r_i^2 - 2 sigma_i^4 / (A + sigma_i^2)]`.
    ///
    /// May be negative; no clipping.
    pub fn value(&self, a: f64) -> Result<f64> {
        ensure_finite("prior variance A", a)?;
        if a < 0.0 {
            return Err(Error::domain(format!("SURE is defined for A >= 0, got {a}")));
        }
        Ok(self.eval(a))
    }

    fn eval(&self, a: f64) -> f64 {
        let total: f64 = self
            .residuals
            .iter()
            .zip(&self.noise_variances)
            .map(|(r, s2)| {
                let s4 = s2 * s2;
                let t = a + s2;
                s2 + s4 / (t * t) * r * r - 2.0 * s4 / t
            })
            .sum();
        total / self.len() as f64
    }

    /// `argmin_{A >= 0} SURE(A)`.
    ///
    /// Equal noise variances use the closed form [`estimate_a_moment`]. Otherwise
    /// the minimizer lies in `[0, max r_i^2]` (SURE is increasing beyond it); a
    /// 256-point log-spaced scan picks a bracket that golden-section search
    /// refines to `1e-9 (1 + max r_i^2)`. A minimum at the boundary returns exactly 0.
    pub fn minimize(&self) -> f64 {
        if let Some(sigma2) = self.common_variance() {
            return estimate_a_moment(&self.residuals, sigma2).expect("validated objective");
        }
        let a_max = self.residuals.iter().fold(0.0_f64, |m, r| m.max(r * r));
        if a_max == 0.0 {
            return 0.0;
        }

        let mut grid = Vec::with_capacity(SURE_GRID_POINTS);
        grid.push(0.0);
        let steps = (SURE_GRID_POINTS - 2) as f64;
        for j in 0..(SURE_GRID_POINTS - 1) {
            let exponent = -10.0 + 10.0 * j as f64 / steps;
            grid.push(a_max * 10f64.powf(exponent));
        }
        *grid.last_mut().expect("grid") = a_max;

        let values: Vec<f64> = grid.iter().map(|&a| self.eval(a)).collect();
        let best = values
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if *v < values[best] { j } else { best });
        let lo = if best == 0 { 0.0 } else { grid[best - 1] };
        let hi = if best + 1 < grid.len() { grid[best + 1] } else { a_max };
        let refined = golden_section(|a| self.eval(a), lo, hi, 1e-9 * (1.0 + a_max));

        let (mut arg, mut val) = (refined.x, refined.value);
        if values[best] < val {
            arg = grid[best];
            val = values[best];
        }
        if values[0] <= val {
            return 0.0;
        }
        arg
    }
}

/// Free-function form of [`SureObjective::value`].
pub fn sure_value(objective: &SureObjective, a: f64) -> Result<f64> {
    objective.value(a)
}

/// Free-function form of [`SureObjective::minimize`].
pub fn minimize_sure(objective: &SureObjective) -> f64 {
    objective.minimize()
}

/// A regression function that can be evaluated at one covariate vector.
pub trait PointRegression: Sync {
    fn predict_point(&self, x: &[f64]) -> Result<f64>;
}

impl<F> PointRegression for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// A fitted denoiser `t*_{m_hat, A}`: a regression plus a prior variance.
#[derive(Debug, Clone)]
pub struct ShrinkageRule<R> {
    regression: R,
    prior_variance: f64,
}

impl<R: PointRegression> ShrinkageRule<R> {
    /// Negative `prior_variance` is clipped to 0.
    pub fn new(regression: R, prior_variance: f64) -> Result<Self> {
        ensure_finite("prior variance A", prior_variance)?;
        Ok(Self {
            regression,
            prior_variance: prior_variance.max(0.0),
        })
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    pub fn regression(&self) -> &R {
        &self.regression
    }

    pub fn prediction_weight(&self, sigma2: f64) -> f64 {
        prediction_weight(self.prior_variance, sigma2)
    }

    pub fn apply(&self, x: &[f64], z: f64, sigma2: f64) -> Result<f64> {
        let m = self.regression.predict_point(x)?;
        bayes_shrink(m, z, self.prior_variance, sigma2)
    }
}

/// Monte Carlo excess risk `L(t; m, A)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessRiskValue {
    pub value: f64,
    pub mc_std_error: f64,
    /// `E[(t(X, Z) - mu)^2]` for the rule under test.
    pub rule_risk: MeanEstimate,
    /// `E[(t*_{m,A}(X, Z) - mu)^2]` for the oracle rule on the same draws.
    pub bayes_risk: MeanEstimate,
}

const MC_CHUNK: usize = 4096;

/// Averages `draw` over `n_mc` fresh draws split into fixed chunks, each on its
/// own substream, so the result does not depend on the thread count.
pub(crate) fn mc_means<const K: usize, F>(n_mc: usize, seed: u64, draw: F) -> Result<[RunningStats; K]>
where
    F: Fn(&mut StreamRng) -> Result<[f64; K]> + Sync,
{
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let partial: Vec<[RunningStats; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &[label::EXCESS_RISK, c as u64]);
            let len = MC_CHUNK.min(n_mc - c * MC_CHUNK);
            let mut acc = [RunningStats::new(); K];
            for _ in 0..len {
                let v = draw(&mut rng)?;
                for (a, x) in acc.iter_mut().zip(v) {
                    a.push(x);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [RunningStats::new(); K];
    for p in &partial {
        for (t, s) in total.iter_mut().zip(p) {
            t.merge(s);
        }
    }
    Ok(total)
}

fn check_scenario(scenario: &HierarchicalSpec, n_mc: usize) -> Result<f64> {
    if n_mc < 100 {
        return Err(Error::domain(format!("need at least 100 Monte Carlo draws, got {n_mc}")));
    }
    scenario
        .constant_sigma()
        .ok_or_else(|| Error::domain("excess risk needs a constant noise sd"))
}

/// One draw `(x, mu, z)` of a fresh unit from the scenario.
fn draw_unit(scenario: &HierarchicalSpec, sigma: f64, rng: &mut StreamRng, x: &mut [f64]) -> (f64, f64, f64) {
    scenario.covariate_law().sample_into(rng, x);
    let m = scenario.mean_function().eval(x);
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);
    let mu = m + scenario.prior_variance().sqrt() * e1;
    (m, mu, mu + sigma * e2)
}

/// Monte Carlo estimate of the excess risk of `rule` over the oracle Bayes rule
/// under `scenario` (which supplies `P^X`, the true `m`, `A` and `sigma`).
///
/// Losses are paired draw by draw, so the standard error is that of the per-draw
/// loss difference.
pub fn excess_risk_mc<R: PointRegression>(
    rule: &ShrinkageRule<R>,
    scenario: &HierarchicalSpec,
    n_mc: usize,
    seed: u64,
) -> Result<ExcessRiskValue> {
    let sigma = check_scenario(scenario, n_mc)?;
    let sigma2 = sigma * sigma;
    let a = scenario.prior_variance();
    let d = scenario.dim();
    let [diff, rule_loss, bayes_loss] = mc_means(n_mc, seed, |rng| {
        let mut x = vec![0.0; d];
        let (m, mu, z) = draw_unit(scenario, sigma, rng, &mut x);
        let t = rule.apply(&x, z, sigma2)?;
        let oracle = shrink_unchecked(m, z, a, sigma2);
        let (lr, lb) = ((t - mu).powi(2), (oracle - mu).powi(2));
        Ok([lr - lb, lr, lb])
    })?;
    let diff = diff.estimate();
    Ok(ExcessRiskValue {
        value: diff.mean,
        mc_std_error: diff.std_error,
        rule_risk: rule_loss.estimate(),
        bayes_risk: bayes_loss.estimate(),
    })
}

/// Paired Monte Carlo estimate of `risk(first) - risk(second)`.
pub fn risk_difference_mc<R1: PointRegression, R2: PointRegression>(
    first: &ShrinkageRule<R1>,
    second: &ShrinkageRule<R2>,
    scenario: &HierarchicalSpec,
    n_mc: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    let sigma = check_scenario(scenario, n_mc)?;
    let sigma2 = sigma * sigma;
    let d = scenario.dim();
    let [diff] = mc_means(n_mc, seed, |rng| {
        let mut x = vec![0.0; d];
        let (_, mu, z) = draw_unit(scenario, sigma, rng, &mut x);
        let a = first.apply(&x, z, sigma2)?;
        let b = second.apply(&x, z, sigma2)?;
        Ok([(a - mu).powi(2) - (b - mu).powi(2)])
    })?;
    Ok(diff.estimate())
}
