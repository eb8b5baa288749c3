use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, integrate};
use crate::rng::{child_seed, label};
use crate::shrinkage::mc_means;
use crate::stats::MeanEstimate;

/// Integration half-width in marginal standard deviations beyond the outer
/// component means. The Gaussian tail mass past 12 sd is below 1e-32.
pub const SUPPORT_HALF_WIDTH: f64 = 12.0;

const QUAD_TOL: f64 = 1e-9;

/// Equal-weight mixture `G = (N(eta1, A) + N(eta2, A)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePrior {
    eta1: f64,
    eta2: f64,
    a: f64,
}

impl MixturePrior {
    pub fn new(eta1: f64, eta2: f64, a: f64) -> Result<Self> {
        if !(eta1.is_finite() && eta2.is_finite()) {
            return Err(Error::domain("mixture means must be finite"));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::domain(format!("component variance must be >= 0, got {a}")));
        }
        Ok(MixturePrior { eta1, eta2, a })
    }

    pub fn gaussian(eta: f64, a: f64) -> Result<Self> {
        Self::new(eta, eta, a)
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Prior density at `mu` (for `A > 0`).
    pub fn density(&self, mu: f64) -> f64 {
        0.5 * (normal_pdf(mu - self.eta1, self.a) + normal_pdf(mu - self.eta2, self.a))
    }

    /// Marginal density of `Z` under `sigma2` noise.
    pub fn marginal_density(&self, z: f64, sigma2: f64) -> f64 {
        let s2 = self.a + sigma2;
        0.5 * (normal_pdf(z - self.eta1, s2) + normal_pdf(z - self.eta2, s2))
    }

    /// Closed-form posterior mean `E[mu | Z = z]`.
    pub fn posterior_mean(&self, z: f64, sigma2: f64) -> f64 {
        let s2 = self.a + sigma2;
        let w1 = self.first_component_weight(z, s2);
        let shrink = self.a / s2;
        let c1 = self.eta1 + shrink * (z - self.eta1);
        let c2 = self.eta2 + shrink * (z - self.eta2);
        w1 * c1 + (1.0 - w1) * c2
    }

    /// Posterior mean by Gauss-Hermite quadrature over each prior component;
    /// an independent check of [`MixturePrior::posterior_mean`].
    pub fn posterior_mean_quadrature(&self, z: f64, sigma2: f64, nodes: usize) -> Result<f64> {
        if self.a == 0.0 {
            let (l1, l2) = (normal_pdf(z - self.eta1, sigma2), normal_pdf(z - self.eta2, sigma2));
            return Ok((l1 * self.eta1 + l2 * self.eta2) / (l1 + l2));
        }
        let (t, w) = gauss_hermite(nodes)?;
        let scale = (2.0 * self.a).sqrt();
        // Likelihoods are computed relative to the largest one to avoid underflow.
        let mus: Vec<(f64, f64)> = [self.eta1, self.eta2]
            .iter()
            .flat_map(|&eta| t.iter().zip(&w).map(move |(ti, wi)| (eta + scale * ti, *wi)))
            .collect();
        let log_lik = |mu: f64| -(z - mu).powi(2) / (2.0 * sigma2);
        let peak = mus.iter().map(|&(mu, _)| log_lik(mu)).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for &(mu, wi) in &mus {
            let l = wi * (log_lik(mu) - peak).exp();
            num += l * mu;
            den += l;
        }
        if !(den > 0.0) {
            return Err(Error::Numerical {
                what: "posterior normalizer underflowed".into(),
                achieved: den,
                requested: 0.0,
            });
        }
        Ok(num / den)
    }

    fn first_component_weight(&self, z: f64, s2: f64) -> f64 {
        // w1 = 1 / (1 + exp(l2 - l1)) with l_k the component log-likelihoods.
        let d = ((z - self.eta1).powi(2) - (z - self.eta2).powi(2)) / (2.0 * s2);
        1.0 / (1.0 + d.exp())
    }

    /// Standardized half-gap `a = |eta1 - eta2| / (2 s)` and the marginal sd `s`.
    fn standardized(&self, sigma2: f64) -> (f64, f64) {
        let s = (self.a + sigma2).sqrt();
        ((self.eta1 - self.eta2).abs() / (2.0 * s), s)
    }
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2.is_finite() && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("sigma2 must be > 0, got {sigma2}")))
    }
}

/// Standardized marginal: `g(u) = (phi(u - a) + phi(u + a)) / 2`, whose score
/// is `g'(u)/g(u) = -u + a tanh(a u)`. Rescaling by the marginal sd `s`
/// gives `I(f_g) = J / s^2` with `J` the Fisher information of `g`.
fn standardized_density(u: f64, half_gap: f64) -> f64 {
    0.5 * (normal_pdf(u - half_gap, 1.0) + normal_pdf(u + half_gap, 1.0))
}

fn standardized_integral<F: Fn(f64) -> f64>(half_gap: f64, s: f64, f: F) -> Result<f64> {
    let r = half_gap + SUPPORT_HALF_WIDTH;
    // Tolerance on the standardized integral that yields QUAD_TOL on I(f_g).
    integrate(|u| f(u) * standardized_density(u, half_gap), -r, r, QUAD_TOL * s * s)
}

/// Fisher information `I(f_g) = \int f_g'(z)^2 / f_g(z) dz` of the marginal of
/// `Z` under the mixture prior and `N(0, sigma2)` noise.
pub fn fisher_information_marginal(prior: &MixturePrior, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let (h, s) = prior.standardized(sigma2);
    let j = standardized_integral(h, s, |u| {
        let score = -u + h * (h * u).tanh();
        score * score
    })?;
    Ok(j / (s * s))
}

/// `1 - J` computed directly from `J = E_g[(u - a tanh(a u))^2]` and
/// `E_g[u^2] = 1 + a^2`, so that small regrets do not suffer cancellation.
fn information_deficit(prior: &MixturePrior, sigma2: f64) -> Result<f64> {
    let (h, s) = prior.standardized(sigma2);
    if h == 0.0 {
        return Ok(0.0);
    }
    standardized_integral(h, s, |u| {
        let t = (h * u).tanh();
        2.0 * h * u * t - h * h * (1.0 + t * t)
    })
}

/// Bayes risk of the posterior mean by Brown's identity `sigma^2 (1 - sigma^2 I(f_g))`.
pub fn bayes_risk_brown(prior: &MixturePrior, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let s2 = prior.a + sigma2;
    let deficit = information_deficit(prior, sigma2)?;
    let risk = sigma2 * prior.a / s2 + sigma2 * sigma2 * deficit / s2;
    // Only rounding-sized excursions are clamped; anything else is a bug.
    let slack = 1e-9 * sigma2;
    if risk < -slack || risk > sigma2 + slack {
        return Err(Error::Numerical {
            what: format!("Bayes risk {risk} outside [0, sigma^2 = {sigma2}]"),
            achieved: risk,
            requested: 0.0,
        });
    }
    Ok(risk.clamp(0.0, sigma2))
}

/// Regret of the mixture Bayes rule against the Gaussian benchmark
/// `A sigma^2 / (A + sigma^2)`: `sigma^4 (1/s^2 - I(f_g))` with `s^2 = A + sigma^2`.
pub fn mixture_regret(prior: &MixturePrior, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let s2 = prior.a + sigma2;
    let deficit = information_deficit(prior, sigma2)?;
    if deficit < -QUAD_TOL {
        return Err(Error::Numerical {
            what: "negative information deficit".into(),
            achieved: deficit,
            requested: 0.0,
        });
    }
    Ok(sigma2 * sigma2 * deficit.max(0.0) / s2)
}

/// Direct Monte Carlo Bayes risk: draw `mu ~ G`, `Z ~ N(mu, sigma2)` and score
/// the closed-form posterior mean.
pub fn bayes_risk_mc(prior: &MixturePrior, sigma2: f64, draws: usize, seed: u64) -> Result<MeanEstimate> {
    check_sigma2(sigma2)?;
    if draws < 2 {
        return Err(Error::domain("need at least 2 draws"));
    }
    let (sd_a, sd_noise) = (prior.a.sqrt(), sigma2.sqrt());
    let [loss] = mc_means(draws, child_seed(seed, &[label::ORACLE]), |rng| {
        let eta = if rng.random::<bool>() { prior.eta1 } else { prior.eta2 };
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let mu = eta + sd_a * e1;
        let z = mu + sd_noise * e2;
        Ok([(prior.posterior_mean(z, sigma2) - mu).powi(2)])
    })?;
    Ok(loss.estimate())
}
