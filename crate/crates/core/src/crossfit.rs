//! Cross-fitted empirical Bayes.
//!
//! Units are split into K folds. For each fold `F`, the regression is fitted on
//! the other folds, the prior variance `A_F` is chosen by SURE on `F`'s own
//! out-of-fold residuals, and every unit in `F` is shrunk with `(m_hat, A_F)`.
//! A unit's estimate therefore never uses a regression trained on its own `Z`.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regressors::{fit, Backend, RegressionModel};
use crate::rng::{label, substream};
use crate::shrinkage::{shrink_unchecked, SureObjective};
use crate::simulate::Dataset;

/// Default number of cross-fitting folds.
pub const DEFAULT_FOLDS: usize = 5;

/// Balanced random partition of `0..n` into `n_folds` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    n: usize,
    n_folds: usize,
    assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    /// Fold id of every unit.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Units in fold `f`, ascending.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Units outside fold `f`, ascending.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_folds];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }
}

/// Shuffles `0..n` with the seed and deals units round-robin into folds, so
/// fold sizes differ by at most one.
pub fn make_folds(n: usize, n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_folds > n {
        return Err(Error::domain(format!("cannot split {n} units into {n_folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, &[label::FOLDS, n as u64, n_folds as u64]);
    order.shuffle(&mut rng);
    let mut assignment = vec![0; n];
    for (pos, &unit) in order.iter().enumerate() {
        assignment[unit] = pos % n_folds;
    }
    Ok(FoldAssignment {
        n,
        n_folds,
        assignment,
    })
}

/// Per-fold state of a cross-fitted estimate.
#[derive(Debug, Clone)]
pub struct FoldFit {
    /// Regression fitted on the complement of this fold.
    pub model: RegressionModel,
    /// SURE-selected prior variance for this fold.
    pub prior_variance: f64,
    /// Mean of `(Z_i - m_hat(X_i))^2` over the fold.
    pub mean_sq_residual: f64,
    pub size: usize,
}

/// Result of [`ebcf_fit`].
#[derive(Debug, Clone)]
pub struct EbcfFit {
    pub folds: FoldAssignment,
    pub fold_fits: Vec<FoldFit>,
    /// Out-of-fold regression prediction for every unit.
    pub m_hat: Vec<f64>,
    /// Shrunk estimates `mu_hat_i`.
    pub estimates: Vec<f64>,
}

impl EbcfFit {
    /// Prior variance used for unit `i` (that of its fold).
    pub fn unit_prior_variance(&self, i: usize) -> f64 {
        self.fold_fits[self.folds.assignment[i]].prior_variance
    }
}

/// Cross-fitted empirical Bayes estimates for every unit of `data`.
///
/// Requires `n >= 2 * n_folds` and `sigma_i > 0`. Regression errors propagate.
pub fn ebcf_fit(data: &Dataset, backend: &Backend, n_folds: usize, seed: u64) -> Result<EbcfFit> {
    let n = data.len();
    validate_inputs(data)?;
    if n < 2 * n_folds {
        return Err(Error::domain(format!(
            "{n} units are too few for {n_folds} folds (need at least {}); use fewer folds",
            2 * n_folds
        )));
    }
    let folds = make_folds(n, n_folds, seed)?;

    let per_fold: Vec<(Vec<usize>, Vec<f64>, FoldFit)> = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let held = folds.members(f);
            let train = folds.complement(f);
            let x_train = data.x.select(Axis(0), &train);
            let z_train: Vec<f64> = train.iter().map(|&i| data.z[i]).collect();
            let model = fit(backend, x_train.view(), &z_train)?;

            let x_held = data.x.select(Axis(0), &held);
            let ids: Vec<usize> = held.iter().map(|&i| data.index[i]).collect();
            let preds = model.predict_units(&ids, x_held.view())?;
            let residuals: Vec<f64> = held.iter().zip(&preds).map(|(&i, p)| data.z[i] - p).collect();
            let variances: Vec<f64> = held.iter().map(|&i| data.sigma[i] * data.sigma[i]).collect();
            let mean_sq_residual =
                residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
            let prior_variance = SureObjective::new(residuals, variances)?.minimize();
            let fold_fit = FoldFit {
                model,
                prior_variance,
                mean_sq_residual,
                size: held.len(),
            };
            Ok((held, preds, fold_fit))
        })
        .collect::<Result<_>>()?;

    let mut m_hat = vec![0.0; n];
    let mut estimates = vec![0.0; n];
    let mut fold_fits = Vec::with_capacity(n_folds);
    for (held, preds, fold_fit) in per_fold {
        for (&i, &p) in held.iter().zip(&preds) {
            let s2 = data.sigma[i] * data.sigma[i];
            if !p.is_finite() {
                return Err(Error::Numerical {
                    what: format!("non-finite regression prediction for unit {i}"),
                    achieved: p,
                    requested: 0.0,
                });
            }
            m_hat[i] = p;
            estimates[i] = shrink_unchecked(p, data.z[i], fold_fit.prior_variance, s2);
        }
        fold_fits.push(fold_fit);
    }

    Ok(EbcfFit {
        folds,
        fold_fits,
        m_hat,
        estimates,
    })
}

fn validate_inputs(data: &Dataset) -> Result<()> {
    let n = data.len();
    if data.x.nrows() != n || data.sigma.len() != n || data.index.len() != n {
        return Err(Error::domain("dataset columns have inconsistent lengths"));
    }
    if let Some((i, s)) = data.sigma.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::domain(format!("sigma[{i}] = {s} must be finite and > 0")));
    }
    if let Some(i) = data.z.iter().position(|z| !z.is_finite()) {
        return Err(Error::domain(format!("z[{i}] is not finite")));
    }
    Ok(())
}

/// The covariate-free baseline: shrink towards the in-sample grand mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GrandMeanFit {
    pub center: f64,
    pub prior_variance: f64,
    pub estimates: Vec<f64>,
}

/// Shrinks every `Z_i` towards the grand mean of `z` (computed on the same
/// data, no cross-fitting) with `A` chosen by SURE on the residuals.
pub fn sure_grand_mean_fit(z: &[f64], sigma: &[f64]) -> Result<GrandMeanFit> {
    let n = z.len();
    if n < 2 {
        return Err(Error::domain(format!("grand-mean shrinkage needs n >= 2, got {n}")));
    }
    if sigma.len() != n {
        return Err(Error::domain(format!("{n} observations but {} noise sds", sigma.len())));
    }
    let center = z.iter().sum::<f64>() / n as f64;
    let residuals: Vec<f64> = z.iter().map(|v| v - center).collect();
    let variances: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let prior_variance = SureObjective::new(residuals, variances.clone())?.minimize();
    let estimates = z
        .iter()
        .zip(&variances)
        .map(|(v, s2)| shrink_unchecked(center, *v, prior_variance, *s2))
        .collect();
    Ok(GrandMeanFit {
        center,
        prior_variance,
        estimates,
    })
}
