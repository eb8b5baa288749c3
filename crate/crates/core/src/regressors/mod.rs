//! Regression backends for `m_hat(x) = E[Z | X = x]`.
//!
//! All backends go through [`fit`] and [`RegressionModel`]. k-NN and OLS
//! predict from covariates; the external adapter returns precomputed
//! predictions keyed by unit index, for black-box learners run elsewhere.
//! Covariates are used as given; standardize them beforehand if their scales
//! differ.

mod cv;
mod external;
mod knn;
mod ols;

pub use cv::{cv_select_k, CvSelection};
pub use external::PredictionTable;
pub use knn::KnnModel;
pub use ols::OlsModel;

use std::sync::Arc;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::shrinkage::PointRegression;

/// Which regression to fit.
#[derive(Debug, Clone)]
pub enum Backend {
    /// k-nearest-neighbors with a fixed `k`.
    Knn { k: usize },
    /// k-NN with `k` chosen by `n_folds`-fold cross-validation on the training data.
    KnnCv {
        candidates: Vec<usize>,
        n_folds: usize,
        seed: u64,
    },
    /// Ordinary least squares.
    Ols { intercept: bool },
    /// Precomputed out-of-fold predictions.
    External(Arc<PredictionTable>),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Knn { .. } | Backend::KnnCv { .. } => "knn",
            Backend::Ols { .. } => "ols",
            Backend::External(_) => "external",
        }
    }
}

/// A fitted regression; immutable after [`fit`].
#[derive(Debug, Clone)]
pub enum RegressionModel {
    Knn(KnnModel),
    Ols(OlsModel),
    External(Arc<PredictionTable>),
}

/// Fits `backend` on training covariates `x` (`n x d`) and responses `z`.
pub fn fit(backend: &Backend, x: ArrayView2<f64>, z: &[f64]) -> Result<RegressionModel> {
    if x.nrows() != z.len() {
        return Err(Error::domain(format!(
            "{} covariate rows but {} responses",
            x.nrows(),
            z.len()
        )));
    }
    if z.is_empty() {
        return Err(Error::domain("cannot fit a regression on zero units"));
    }
    match backend {
        Backend::Knn { k } => KnnModel::fit(*k, x, z).map(RegressionModel::Knn),
        Backend::KnnCv {
            candidates,
            n_folds,
            seed,
        } => {
            let selection = cv_select_k(candidates, x, z, *n_folds, *seed)?;
            let mut model = KnnModel::fit(selection.chosen_k, x, z)?;
            model.selection = Some(selection);
            Ok(RegressionModel::Knn(model))
        }
        Backend::Ols { intercept } => OlsModel::fit(*intercept, x, z).map(RegressionModel::Ols),
        Backend::External(table) => Ok(RegressionModel::External(Arc::clone(table))),
    }
}

impl RegressionModel {
    /// Predictions at covariate rows. The external adapter has no covariate
    /// lookup; use [`RegressionModel::predict_units`].
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            RegressionModel::Knn(m) => m.predict(x),
            RegressionModel::Ols(m) => m.predict(x),
            RegressionModel::External(_) => Err(Error::domain(
                "external predictions are keyed by unit index, not covariates",
            )),
        }
    }

    /// Predictions for units identified by `indices` with covariate rows `x`.
    pub fn predict_units(&self, indices: &[usize], x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            RegressionModel::External(table) => table.lookup_all(indices),
            _ => self.predict(x),
        }
    }

    /// The k chosen by cross-validation, for k-NN models fitted with `KnnCv`.
    pub fn chosen_k(&self) -> Option<usize> {
        match self {
            RegressionModel::Knn(m) => Some(m.k()),
            _ => None,
        }
    }
}

impl PointRegression for RegressionModel {
    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        match self {
            RegressionModel::Knn(m) => m.predict_one(x),
            RegressionModel::Ols(m) => m.predict_one(x),
            RegressionModel::External(_) => Err(Error::domain(
                "external predictions are keyed by unit index, not covariates",
            )),
        }
    }
}

pub(crate) fn check_query_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::domain(format!(
            "query has {got} covariates but the model was fitted with {expected}"
        )));
    }
    Ok(())
}
