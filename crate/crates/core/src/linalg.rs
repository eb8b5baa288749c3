//! Small dense kernels: Householder least squares and Cholesky.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Relative threshold on `|R_jj| / max_i |R_ii|` below which a design is
/// declared rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Solves `min ||A b - y||_2` by Householder QR.
///
/// Returns the coefficient vector, or [`Error::Singular`] naming the first
/// column whose `R` diagonal falls below `RANK_TOLERANCE` times the largest one.
pub fn qr_least_squares(a: ArrayView2<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = a.dim();
    if y.len() != n {
        return Err(Error::domain(format!(
            "design has {n} rows but response has {} entries",
            y.len()
        )));
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    if n < p {
        return Err(Error::domain(format!(
            "least squares needs at least as many rows ({n}) as columns ({p})"
        )));
    }

    let mut r = a.to_owned();
    let mut qty = y.to_vec();
    let mut diag = vec![0.0; p];
    let mut v = vec![0.0; n];

    for k in 0..p {
        let norm = (k..n).map(|i| r[[i, k]] * r[[i, k]]).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = r[[i, k]];
        }
        v[k] -= alpha;
        let vnorm2: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        diag[k] = alpha;
        r[[k, k]] = alpha;
        for i in (k + 1)..n {
            r[[i, k]] = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        for j in (k + 1)..p {
            let dot: f64 = (k..n).map(|i| v[i] * r[[i, j]]).sum();
            let scale = 2.0 * dot / vnorm2;
            for i in k..n {
                r[[i, j]] -= scale * v[i];
            }
        }
        let dot: f64 = (k..n).map(|i| v[i] * qty[i]).sum();
        let scale = 2.0 * dot / vnorm2;
        for i in k..n {
            qty[i] -= scale * v[i];
        }
    }

    let largest = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let threshold = RANK_TOLERANCE * largest;
    if let Some(column) = diag.iter().position(|d| d.abs() <= threshold) {
        return Err(Error::Singular {
            column,
            diagonal: diag[column].abs(),
            threshold,
        });
    }

    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let tail: f64 = ((k + 1)..p).map(|j| r[[k, j]] * beta[j]).sum();
        beta[k] = (qty[k] - tail) / r[[k, k]];
    }
    Ok(beta)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::domain(format!("cholesky needs a square matrix, got {n}x{m}")));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l[[j, k]] * l[[j, k]]).sum();
        let d = a[[j, j]] - s;
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::domain(format!(
                "matrix is not positive definite (pivot {j} = {d})"
            )));
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            l[[i, j]] = (a[[i, j]] - s) / djj;
        }
    }
    Ok(l)
}
