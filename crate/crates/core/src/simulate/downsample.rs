//! Hypergeometric down-sampling and the square-root variance-stabilizing transform.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::{label, substream, StreamRng};

/// Events out of a population for one unit (e.g. crimes in a community).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRecord {
    pub events: u64,
    pub population: u64,
}

/// Down-sample every unit to a common population `b`.
#[derive(Debug, Clone)]
pub struct DownsampleSpec {
    b: u64,
    units: Vec<CountRecord>,
}

impl DownsampleSpec {
    pub fn new(b: u64, units: Vec<CountRecord>) -> Result<Self> {
        if b == 0 {
            return Err(Error::domain("down-sampling target B must be positive"));
        }
        for (i, u) in units.iter().enumerate() {
            if u.events > u.population {
                return Err(Error::data(
                    Some(i + 1),
                    format!("events {} exceed population {}", u.events, u.population),
                ));
            }
            if b > u.population {
                return Err(Error::data(
                    Some(i + 1),
                    format!("B = {b} exceeds population {} of unit {i}", u.population),
                ));
            }
        }
        Ok(Self { b, units })
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn units(&self) -> &[CountRecord] {
        &self.units
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Number of marked items among `draws` taken without replacement from a
/// population of `population` items of which `successes` are marked.
///
/// Sampled by CDF inversion, walking outward from the mode with the pmf
/// recurrence; the mode probability is evaluated through log-gamma.
#[derive(Debug, Clone)]
pub struct Hypergeometric {
    population: u64,
    successes: u64,
    draws: u64,
    lo: u64,
    hi: u64,
    mode: u64,
    pmf_mode: f64,
}

impl Hypergeometric {
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if successes > population || draws > population {
            return Err(Error::domain(format!(
                "hypergeometric needs successes ({successes}) and draws ({draws}) <= population ({population})"
            )));
        }
        let lo = (draws + successes).saturating_sub(population);
        let hi = draws.min(successes);
        let raw_mode = ((draws as f64 + 1.0) * (successes as f64 + 1.0) / (population as f64 + 2.0))
            .floor() as u64;
        let mode = raw_mode.clamp(lo, hi);
        let mut h = Self {
            population,
            successes,
            draws,
            lo,
            hi,
            mode,
            pmf_mode: 0.0,
        };
        h.pmf_mode = h.ln_pmf(mode).exp();
        Ok(h)
    }

    pub fn support(&self) -> (u64, u64) {
        (self.lo, self.hi)
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        if k < self.lo || k > self.hi {
            return f64::NEG_INFINITY;
        }
        ln_choose(self.successes, k) + ln_choose(self.population - self.successes, self.draws - k)
            - ln_choose(self.population, self.draws)
    }

    pub fn mean(&self) -> f64 {
        self.draws as f64 * self.successes as f64 / self.population as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.population as f64;
        if self.population <= 1 {
            return 0.0;
        }
        let p = self.successes as f64 / n;
        self.draws as f64 * p * (1.0 - p) * (n - self.draws as f64) / (n - 1.0)
    }

    /// `pmf(k + 1) / pmf(k)`, for `lo <= k < hi`.
    fn ratio_up(&self, k: u64) -> f64 {
        let (big_k, b, n) = (self.successes as f64, self.draws as f64, self.population as f64);
        let k = k as f64;
        (big_k - k) * (b - k) / ((k + 1.0) * (n - big_k - b + k + 1.0))
    }

    pub fn sample(&self, rng: &mut StreamRng) -> u64 {
        if self.lo == self.hi {
            return self.lo;
        }
        loop {
            let u: f64 = rng.random();
            let mut acc = self.pmf_mode;
            if u < acc {
                return self.mode;
            }
            let (mut up, mut down) = (self.mode, self.mode);
            let (mut p_up, mut p_down) = (self.pmf_mode, self.pmf_mode);
            while up < self.hi || down > self.lo {
                if up < self.hi {
                    p_up *= self.ratio_up(up);
                    up += 1;
                    acc += p_up;
                    if u < acc {
                        return up;
                    }
                }
                if down > self.lo {
                    p_down /= self.ratio_up(down - 1);
                    down -= 1;
                    acc += p_down;
                    if u < acc {
                        return down;
                    }
                }
            }
            // u fell into the rounding gap above the summed mass; redraw.
        }
    }
}

/// Draws `C_i ~ Hypergeometric(B, events_i, population_i)` for every unit,
/// each from its own substream of `seed`.
pub fn hypergeometric_downsample(spec: &DownsampleSpec, seed: u64) -> Result<Vec<u64>> {
    spec.units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let h = Hypergeometric::new(u.population, u.events, spec.b)?;
            let mut rng = substream(seed, &[label::DOWNSAMPLE, i as u64]);
            Ok(h.sample(&mut rng))
        })
        .collect()
}

/// `(sqrt(C / B), 1 / (2 sqrt(B)))`: observation and noise sd on the square-root scale.
pub fn sqrt_vst(c: u64, b: u64) -> Result<(f64, f64)> {
    if b == 0 {
        return Err(Error::domain("B must be positive"));
    }
    if c > b {
        return Err(Error::domain(format!("count {c} exceeds B = {b}")));
    }
    let bf = b as f64;
    Ok(((c as f64 / bf).sqrt(), 0.5 / bf.sqrt()))
}

/// Back-transform to the rate scale. Negative estimates are squared as well.
pub fn inverse_vst(mu_hat: f64) -> f64 {
    mu_hat * mu_hat
}

/// Back-transforms a vector and counts the negative inputs.
pub fn inverse_vst_all(mu_hat: &[f64]) -> (Vec<f64>, usize) {
    let negatives = mu_hat.iter().filter(|m| **m < 0.0).count();
    (mu_hat.iter().map(|m| inverse_vst(*m)).collect(), negatives)
}

/// How per-unit sample standard deviations are pooled into one noise sd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// `sqrt(mean(sd_i^2))`.
    #[default]
    MeanVariance,
    /// `mean(sd_i)`.
    MeanSd,
}

pub fn pooled_noise_sd(sds: &[f64], pooling: Pooling) -> Result<f64> {
    if sds.is_empty() {
        return Err(Error::domain("no standard deviations to pool"));
    }
    if let Some(bad) = sds.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::domain(format!("invalid standard deviation {bad}")));
    }
    let n = sds.len() as f64;
    Ok(match pooling {
        Pooling::MeanVariance => (sds.iter().map(|s| s * s).sum::<f64>() / n).sqrt(),
        Pooling::MeanSd => sds.iter().sum::<f64>() / n,
    })
}
