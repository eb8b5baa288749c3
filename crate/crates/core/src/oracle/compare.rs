use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::crossfit::{ebcf_fit, sure_grand_mean_fit, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::regressors::Backend;
use crate::rng::{child_seed, label};
use crate::simulate::{draw_hierarchical, Dataset, HierarchicalSpec, NoiseScale};
use crate::stats::{MeanEstimate, RunningStats};

/// Estimators compared on each simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// `mu_hat = Z`.
    Unbiased,
    /// The out-of-fold regression prediction `m_hat(X)` alone.
    RegressionOnly,
    /// SURE shrinkage towards the grand mean, ignoring covariates.
    SureGrandMean,
    /// Cross-fitted empirical Bayes.
    Ebcf,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Unbiased,
        Estimator::RegressionOnly,
        Estimator::SureGrandMean,
        Estimator::Ebcf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Unbiased => "unbiased",
            Estimator::RegressionOnly => "regression",
            Estimator::SureGrandMean => "sure_grand_mean",
            Estimator::Ebcf => "ebcf",
        }
    }

    fn needs_regression(self) -> bool {
        matches!(self, Estimator::RegressionOnly | Estimator::Ebcf)
    }
}

/// Estimators plus the regression settings shared by those that need one.
#[derive(Debug, Clone)]
pub struct EstimatorSet {
    pub estimators: Vec<Estimator>,
    pub backend: Backend,
    pub n_folds: usize,
}

impl EstimatorSet {
    pub fn all(backend: Backend) -> Self {
        EstimatorSet {
            estimators: Estimator::ALL.to_vec(),
            backend,
            n_folds: DEFAULT_FOLDS,
        }
    }
}

/// Risk summary of one estimator.
#[derive(Debug, Clone)]
pub struct RiskRow {
    pub estimator: Estimator,
    pub mse: f64,
    pub rmse: f64,
    /// Standard error of `mse`: sd of replicate MSEs over sqrt(replicates).
    pub se: f64,
    /// Delta-method standard error of `rmse`.
    pub rmse_se: f64,
    /// Per-replicate MSE, `None` where the fit failed.
    pub replicate_mse: Vec<Option<f64>>,
    /// Error messages of failed replicates, `(replicate, message)`.
    pub failures: Vec<(usize, String)>,
}

impl RiskRow {
    pub fn completed(&self) -> usize {
        self.replicate_mse.iter().flatten().count()
    }
}

/// Result of [`compare_estimators`] for one `n`.
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub n: usize,
    pub a: f64,
    /// The scenario's noise sd (root mean variance if per-unit).
    pub sigma: f64,
    pub replicates: usize,
    pub rows: Vec<RiskRow>,
    /// Fingerprint of each replicate's dataset, shared by all estimators.
    pub dataset_hashes: Vec<u64>,
}

impl RiskReport {
    pub fn row(&self, estimator: Estimator) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// Paired estimate of `MSE(first) - MSE(second)` over replicates where both succeeded.
    pub fn paired_difference(&self, first: Estimator, second: Estimator) -> Option<MeanEstimate> {
        let (a, b) = (self.row(first)?, self.row(second)?);
        let diffs: RunningStats = a
            .replicate_mse
            .iter()
            .zip(&b.replicate_mse)
            .filter_map(|(x, y)| Some((*x)? - (*y)?))
            .collect();
        (diffs.count() >= 2).then(|| diffs.estimate())
    }

    pub const CSV_HEADER: [&'static str; 8] = ["estimator", "n", "A", "sigma", "mse", "rmse", "se", "replicates"];

    /// Writes rows of several reports as CSV with [`RiskReport::CSV_HEADER`].
    pub fn write_csv<W: Write>(reports: &[RiskReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for rep in reports {
            for row in &rep.rows {
                w.write_record([
                    row.estimator.name().to_string(),
                    rep.n.to_string(),
                    rep.a.to_string(),
                    rep.sigma.to_string(),
                    row.mse.to_string(),
                    row.rmse.to_string(),
                    row.se.to_string(),
                    row.completed().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width text table.
    pub fn table(reports: &[RiskReport]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>7} {:>7} {:>7} {:>10} {:>10} {:>10} {:>5}",
            "estimator", "n", "A", "sigma", "mse", "rmse", "se(rmse)", "reps"
        );
        for rep in reports {
            for row in &rep.rows {
                let _ = writeln!(
                    s,
                    "{:<16} {:>7} {:>7.3} {:>7.3} {:>10.5} {:>10.5} {:>10.5} {:>5}",
                    row.estimator.name(),
                    rep.n,
                    rep.a,
                    rep.sigma,
                    row.mse,
                    row.rmse,
                    row.rmse_se,
                    row.completed()
                );
            }
        }
        s
    }
}

fn mse(estimates: &[f64], mu: &[f64]) -> f64 {
    estimates.iter().zip(mu).map(|(e, m)| (e - m).powi(2)).sum::<f64>() / mu.len() as f64
}

/// Per-estimator MSE on one replicate dataset.
fn run_replicate(data: &Dataset, set: &EstimatorSet, seed: u64) -> Vec<std::result::Result<f64, String>> {
    let mu = data.mu.as_deref().expect("simulated data carries mu");
    let fitted = set
        .estimators
        .iter()
        .any(|e| e.needs_regression())
        .then(|| ebcf_fit(data, &set.backend, set.n_folds, seed).map_err(|e| e.to_string()));
    set.estimators
        .iter()
        .map(|e| match e {
            Estimator::Unbiased => Ok(mse(&data.z, mu)),
            Estimator::SureGrandMean => sure_grand_mean_fit(&data.z, &data.sigma)
                .map(|g| mse(&g.estimates, mu))
                .map_err(|e| e.to_string()),
            Estimator::RegressionOnly => match fitted.as_ref().expect("fit computed") {
                Ok(f) => Ok(mse(&f.m_hat, mu)),
                Err(msg) => Err(msg.clone()),
            },
            Estimator::Ebcf => match fitted.as_ref().expect("fit computed") {
                Ok(f) => Ok(mse(&f.estimates, mu)),
                Err(msg) => Err(msg.clone()),
            },
        })
        .collect()
}

/// Paired Monte Carlo comparison: each replicate draws a fresh dataset of size
/// `n` from `scenario` and scores every estimator on it.
///
/// Replicates run in parallel on their own substreams. A failing estimator on a
/// replicate is recorded in [`RiskRow::failures`] instead of aborting.
pub fn compare_estimators(
    scenario: &HierarchicalSpec,
    n: usize,
    replicates: usize,
    set: &EstimatorSet,
    seed: u64,
) -> Result<RiskReport> {
    if replicates < 2 {
        return Err(Error::domain(format!("need at least 2 replicates, got {replicates}")));
    }
    if set.estimators.is_empty() {
        return Err(Error::domain("no estimators selected"));
    }
    let per_rep: Vec<(u64, Vec<std::result::Result<f64, String>>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rep_seed = child_seed(seed, &[label::REPLICATE, n as u64, r as u64]);
            let data = draw_hierarchical(scenario, n, rep_seed)?;
            Ok((data.fingerprint(), run_replicate(&data, set, rep_seed)))
        })
        .collect::<Result<_>>()?;

    let rows = set
        .estimators
        .iter()
        .enumerate()
        .map(|(j, &estimator)| {
            let mut replicate_mse = Vec::with_capacity(replicates);
            let mut failures = Vec::new();
            for (r, (_, results)) in per_rep.iter().enumerate() {
                match &results[j] {
                    Ok(v) => replicate_mse.push(Some(*v)),
                    Err(msg) => {
                        log::warn!("{} failed on replicate {r}: {msg}", estimator.name());
                        replicate_mse.push(None);
                        failures.push((r, msg.clone()));
                    }
                }
            }
            let stats: RunningStats = replicate_mse.iter().flatten().copied().collect();
            let (mse, se) = if stats.count() >= 2 {
                let e = stats.estimate();
                (e.mean, e.std_error)
            } else {
                (f64::NAN, f64::NAN)
            };
            let rmse = mse.sqrt();
            RiskRow {
                estimator,
                mse,
                rmse,
                se,
                rmse_se: if rmse > 0.0 { se / (2.0 * rmse) } else { se.sqrt() },
                replicate_mse,
                failures,
            }
        })
        .collect();

    let sigma = match scenario.noise() {
        NoiseScale::Constant(s) => *s,
        NoiseScale::PerUnit(v) => (v.iter().map(|s| s * s).sum::<f64>() / v.len() as f64).sqrt(),
    };
    Ok(RiskReport {
        n,
        a: scenario.prior_variance(),
        sigma,
        replicates,
        rows,
        dataset_hashes: per_rep.iter().map(|(h, _)| *h).collect(),
    })
}
