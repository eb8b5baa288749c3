//! Data generation: the hierarchical Gaussian model, the Friedman benchmark
//! and hypergeometric down-sampling of count data.
//!
//! The hierarchical model draws, independently for each unit,
//!
//! ```text
//! X_i ~ P^X,   mu_i | X_i ~ N(m(X_i), A),   Z_i | mu_i ~ N(mu_i, sigma_i^2)
//! ```

mod downsample;

pub use downsample::{
    hypergeometric_downsample, inverse_vst, inverse_vst_all, pooled_noise_sd, sqrt_vst,
    CountRecord, DownsampleSpec, Hypergeometric, Pooling,
};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::cholesky;
use crate::rng::{label, substream, StreamRng};

/// Dimension of the Friedman benchmark covariates (5 active, 10 noise).
pub const FRIEDMAN_DIM: usize = 15;

/// `m(x) = 10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5`; coordinates 6..15 are ignored.
pub fn friedman_m(x: &[f64]) -> Result<f64> {
    if x.len() != FRIEDMAN_DIM {
        return Err(Error::domain(format!(
            "Friedman function takes {FRIEDMAN_DIM} coordinates, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        log::warn!("Friedman function evaluated outside the unit cube");
    }
    Ok(friedman_unchecked(x))
}

fn friedman_unchecked(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// The regression function `m(x) = E[mu | X = x]`.
#[derive(Clone)]
pub enum MeanFunction {
    Friedman,
    Linear { intercept: f64, beta: Vec<f64> },
    Constant(f64),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl MeanFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFunction::Friedman => friedman_unchecked(x),
            MeanFunction::Linear { intercept, beta } => {
                intercept + beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
            MeanFunction::Constant(c) => *c,
            MeanFunction::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFunction::Friedman => write!(f, "Friedman"),
            MeanFunction::Linear { intercept, beta } => f
                .debug_struct("Linear")
                .field("intercept", intercept)
                .field("beta", beta)
                .finish(),
            MeanFunction::Constant(c) => write!(f, "Constant({c})"),
            MeanFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Law of the covariate vector.
#[derive(Debug, Clone)]
pub enum CovariateLaw {
    /// i.i.d. U[0, 1] coordinates.
    UniformCube,
    /// Centered Gaussian; holds the lower Cholesky factor of the covariance.
    Gaussian { chol: Array2<f64> },
}

impl CovariateLaw {
    pub fn gaussian(covariance: &Array2<f64>) -> Result<Self> {
        Ok(CovariateLaw::Gaussian {
            chol: cholesky(covariance.view())?,
        })
    }

    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            CovariateLaw::UniformCube => {
                for v in out.iter_mut() {
                    *v = rng.random::<f64>();
                }
            }
            CovariateLaw::Gaussian { chol } => {
                let d = out.len();
                let mut eps = vec![0.0; d];
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                for i in 0..d {
                    out[i] = (0..=i).map(|k| chol[[i, k]] * eps[k]).sum();
                }
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            CovariateLaw::UniformCube => None,
            CovariateLaw::Gaussian { chol } => Some(chol.nrows()),
        }
    }
}

/// Noise standard deviation: common to all units or one per unit.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseScale {
    Constant(f64),
    PerUnit(Vec<f64>),
}

/// Parameters of the hierarchical model.
#[derive(Debug, Clone)]
pub struct HierarchicalSpec {
    d: usize,
    covariate_law: CovariateLaw,
    m: MeanFunction,
    prior_variance: f64,
    noise: NoiseScale,
}

impl HierarchicalSpec {
    pub fn new(
        d: usize,
        covariate_law: CovariateLaw,
        m: MeanFunction,
        prior_variance: f64,
        noise: NoiseScale,
    ) -> Result<Self> {
        ensure_finite("prior variance A", prior_variance)?;
        if prior_variance < 0.0 {
            return Err(Error::domain(format!(
                "prior variance A must be >= 0, got {prior_variance}"
            )));
        }
        let sigmas: &[f64] = match &noise {
            NoiseScale::Constant(s) => std::slice::from_ref(s),
            NoiseScale::PerUnit(v) => v,
        };
        if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::domain(format!("noise sd must be finite and > 0, got {bad}")));
        }
        if let Some(law_d) = covariate_law.dim() {
            if law_d != d {
                return Err(Error::domain(format!(
                    "covariance is {law_d}-dimensional but d = {d}"
                )));
            }
        }
        match &m {
            MeanFunction::Friedman if d != FRIEDMAN_DIM => {
                return Err(Error::domain(format!(
                    "Friedman mean function needs d = {FRIEDMAN_DIM}, got {d}"
                )))
            }
            MeanFunction::Linear { beta, .. } if beta.len() != d => {
                return Err(Error::domain(format!(
                    "linear mean has {} coefficients but d = {d}",
                    beta.len()
                )))
            }
            _ => {}
        }
        Ok(Self {
            d,
            covariate_law,
            m,
            prior_variance,
            noise,
        })
    }

    /// Friedman benchmark: `X ~ U[0,1]^15`, constant noise sd `sigma`.
    pub fn friedman(prior_variance: f64, sigma: f64) -> Result<Self> {
        Self::new(
            FRIEDMAN_DIM,
            CovariateLaw::UniformCube,
            MeanFunction::Friedman,
            prior_variance,
            NoiseScale::Constant(sigma),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn covariate_law(&self) -> &CovariateLaw {
        &self.covariate_law
    }

    pub fn mean_function(&self) -> &MeanFunction {
        &self.m
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    pub fn noise(&self) -> &NoiseScale {
        &self.noise
    }

    /// The common noise sd, if the noise is homoskedastic.
    pub fn constant_sigma(&self) -> Option<f64> {
        match self.noise {
            NoiseScale::Constant(s) => Some(s),
            NoiseScale::PerUnit(_) => None,
        }
    }

    fn sigma_at(&self, i: usize) -> f64 {
        match &self.noise {
            NoiseScale::Constant(s) => *s,
            NoiseScale::PerUnit(v) => v[i],
        }
    }
}

/// Observed data for `n` units, plus ground truth when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// External unit identifiers; row order otherwise.
    pub index: Vec<usize>,
    /// `n x d` covariates.
    pub x: Array2<f64>,
    pub z: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mu: Option<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    /// FNV-1a over the bit patterns of every field; equal datasets hash equal.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |word: u64| {
            for byte in word.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(self.len() as u64);
        eat(self.dim() as u64);
        self.index.iter().for_each(|&i| eat(i as u64));
        self.x.iter().for_each(|v| eat(v.to_bits()));
        self.z.iter().for_each(|v| eat(v.to_bits()));
        self.sigma.iter().for_each(|v| eat(v.to_bits()));
        if let Some(mu) = &self.mu {
            mu.iter().for_each(|v| eat(v.to_bits()));
        }
        h
    }
}

/// Draws `n` units from the hierarchical model; deterministic in `seed`.
pub fn draw_hierarchical(spec: &HierarchicalSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::domain("cannot draw an empty dataset (n = 0)"));
    }
    if let NoiseScale::PerUnit(v) = &spec.noise {
        if v.len() != n {
            return Err(Error::domain(format!(
                "per-unit noise has {} entries but n = {n}",
                v.len()
            )));
        }
    }
    let d = spec.d;
    let mut rng = substream(seed, &[label::DATASET]);
    let prior_sd = spec.prior_variance.sqrt();
    let mut x = Array2::<f64>::zeros((n, d));
    let mut mu = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut row = vec![0.0; d];
    for i in 0..n {
        spec.covariate_law.sample_into(&mut rng, &mut row);
        x.row_mut(i).iter_mut().zip(&row).for_each(|(dst, v)| *dst = *v);
        let prior_noise: f64 = rng.sample(StandardNormal);
        let obs_noise: f64 = rng.sample(StandardNormal);
        let mean = spec.m.eval(&row);
        // A = 0 must give mu == m(x) exactly.
        let mu_i = if prior_sd == 0.0 {
            mean
        } else {
            mean + prior_sd * prior_noise
        };
        let s = spec.sigma_at(i);
        mu.push(mu_i);
        z.push(mu_i + s * obs_noise);
        sigma.push(s);
    }
    Ok(Dataset {
        index: (0..n).collect(),
        x,
        z,
        sigma,
        mu: Some(mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningStats;
    use ndarray::array;

    #[test]
    fn friedman_values() {
        let mut x = [0.0; 15];
        x[2] = 0.5;
        assert_eq!(friedman_m(&x).unwrap(), 0.0);

        let mut x = [0.0; 15];
        x[0] = 0.5;
        x[1] = 1.0;
        x[2] = 0.5;
        assert!((friedman_m(&x).unwrap() - 10.0).abs() < 1e-12);

        let mut x = [1.0; 15];
        x[2] = 0.0;
        assert!((friedman_m(&x).unwrap() - 20.0).abs() < 1e-12);

        assert!(friedman_m(&[0.5; 5]).is_err());
        // outside the cube only warns
        assert!(friedman_m(&[2.0; 15]).is_ok());
    }

    #[test]
    fn friedman_ignores_noise_coordinates() {
        let mut x = [0.3; 15];
        let base = friedman_m(&x).unwrap();
        for v in x[5..].iter_mut() {
            *v = 0.9;
        }
        assert_eq!(friedman_m(&x).unwrap(), base);
    }

    #[test]
    fn zero_prior_variance_pins_mu_to_m() {
        let spec = HierarchicalSpec::friedman(0.0, 2.0).unwrap();
        let data = draw_hierarchical(&spec, 200, 11).unwrap();
        let mu = data.mu.as_ref().unwrap();
        for i in 0..data.len() {
            let row: Vec<f64> = data.row(i).to_vec();
            assert_eq!(mu[i], friedman_m(&row).unwrap());
        }
    }

    #[test]
    fn marginal_residual_moments() {
        // Z - m(X) ~ N(0, A + sigma^2) = N(0, 8); prior part mu - m(X) centered.
        let spec = HierarchicalSpec::friedman(4.0, 2.0).unwrap();
        let n = 100_000;
        let data = draw_hierarchical(&spec, n, 2024).unwrap();
        let mu = data.mu.as_ref().unwrap();
        let mut resid = Vec::with_capacity(n);
        let mut centered = RunningStats::new();
        for i in 0..n {
            let m = friedman_m(&data.row(i).to_vec()).unwrap();
            resid.push(data.z[i] - m);
            centered.push(mu[i] - m);
        }
        let stats: RunningStats = resid.iter().copied().collect();
        let var = stats.variance();
        // SE of a sample variance under normality: var * sqrt(2 / (n - 1)).
        let var_se = 8.0 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 8.0).abs() <= 3.0 * var_se, "var {var}");
        assert!(centered.estimate().within(0.0, 3.0));

        // kurtosis of standardized residuals, SE ~ sqrt(24 / n)
        let sd = var.sqrt();
        let kurt: f64 = resid
            .iter()
            .map(|r| ((r - stats.mean()) / sd).powi(4))
            .sum::<f64>()
            / n as f64;
        assert!((kurt - 3.0).abs() <= 3.0 * (24.0 / n as f64).sqrt(), "kurtosis {kurt}");
    }

    #[test]
    fn deterministic_by_seed() {
        let spec = HierarchicalSpec::friedman(1.0, 1.0).unwrap();
        let a = draw_hierarchical(&spec, 50, 3).unwrap();
        let b = draw_hierarchical(&spec, 50, 3).unwrap();
        let c = draw_hierarchical(&spec, 50, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn gaussian_covariates_have_requested_covariance() {
        let cov = array![[1.0, 0.6], [0.6, 2.0]];
        let spec = HierarchicalSpec::new(
            2,
            CovariateLaw::gaussian(&cov).unwrap(),
            MeanFunction::Constant(0.0),
            0.0,
            NoiseScale::Constant(1.0),
        )
        .unwrap();
        let data = draw_hierarchical(&spec, 50_000, 9).unwrap();
        let n = data.len() as f64;
        let c01 = data.x.column(0).iter().zip(data.x.column(1)).map(|(a, b)| a * b).sum::<f64>() / n;
        let c11 = data.x.column(1).iter().map(|b| b * b).sum::<f64>() / n;
        assert!((c01 - 0.6).abs() < 0.05);
        assert!((c11 - 2.0).abs() < 0.08);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(HierarchicalSpec::friedman(-1.0, 1.0).is_err());
        assert!(HierarchicalSpec::friedman(1.0, 0.0).is_err());
        assert!(HierarchicalSpec::new(
            3,
            CovariateLaw::UniformCube,
            MeanFunction::Friedman,
            1.0,
            NoiseScale::Constant(1.0)
        )
        .is_err());
        let spec = HierarchicalSpec::friedman(1.0, 1.0).unwrap();
        assert!(draw_hierarchical(&spec, 0, 1).is_err());
    }
}
