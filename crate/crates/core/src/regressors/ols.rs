use ndarray::{Array2, ArrayView2};

use super::check_query_dim;
use crate::error::{Error, Result};
use crate::linalg::qr_least_squares;

/// Least-squares linear regression, solved by Householder QR.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsModel {
    intercept: bool,
    d: usize,
    /// Intercept first when present, then one slope per covariate.
    coefficients: Vec<f64>,
}

impl OlsModel {
    pub fn fit(intercept: bool, x: ArrayView2<f64>, z: &[f64]) -> Result<Self> {
        let (n, d) = x.dim();
        let p = d + usize::from(intercept);
        if p == 0 {
            return Err(Error::domain("OLS without intercept needs at least one covariate"));
        }
        if n <= p {
            return Err(Error::domain(format!(
                "OLS needs more units than coefficients: n = {n}, coefficients = {p}"
            )));
        }
        let design = if intercept {
            Array2::from_shape_fn((n, p), |(i, j)| if j == 0 { 1.0 } else { x[[i, j - 1]] })
        } else {
            x.to_owned()
        };
        let coefficients = qr_least_squares(design.view(), z)?;
        Ok(Self {
            intercept,
            d,
            coefficients,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> Option<f64> {
        self.intercept.then(|| self.coefficients[0])
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[usize::from(self.intercept)..]
    }

    pub fn predict_one(&self, q: &[f64]) -> Result<f64> {
        check_query_dim(self.d, q.len())?;
        let base = self.intercept().unwrap_or(0.0);
        Ok(base + self.slopes().iter().zip(q).map(|(b, v)| b * v).sum::<f64>())
    }

    pub fn predict(&self, q: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_query_dim(self.d, q.ncols())?;
        let base = self.intercept().unwrap_or(0.0);
        Ok(q.outer_iter()
            .map(|row| base + self.slopes().iter().zip(row).map(|(b, v)| b * v).sum::<f64>())
            .collect())
    }
}
