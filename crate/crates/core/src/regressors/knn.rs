use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::{check_query_dim, CvSelection};
use crate::error::{Error, Result};

/// k-nearest-neighbors regression under Euclidean distance. Distance ties go
/// to the lower training index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    x: Array2<f64>,
    z: Vec<f64>,
    pub(super) selection: Option<CvSelection>,
}

impl KnnModel {
    pub fn fit(k: usize, x: ArrayView2<f64>, z: &[f64]) -> Result<Self> {
        let n = z.len();
        if k == 0 || k > n {
            return Err(Error::domain(format!("k-NN needs 1 <= k <= n, got k = {k}, n = {n}")));
        }
        Ok(Self {
            k,
            x: x.as_standard_layout().into_owned(),
            z: z.to_vec(),
            selection: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn selection(&self) -> Option<&CvSelection> {
        self.selection.as_ref()
    }

    pub fn predict_one(&self, q: &[f64]) -> Result<f64> {
        check_query_dim(self.x.ncols(), q.len())?;
        let nn = nearest(self.x.view(), q, self.k);
        Ok(nn.iter().map(|&i| self.z[i]).sum::<f64>() / self.k as f64)
    }

    pub fn predict(&self, q: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_query_dim(self.x.ncols(), q.ncols())?;
        Ok((0..q.nrows())
            .into_par_iter()
            .map(|r| {
                let row = q.row(r).to_vec();
                let nn = nearest(self.x.view(), &row, self.k);
                nn.iter().map(|&i| self.z[i]).sum::<f64>() / self.k as f64
            })
            .collect())
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Squared Euclidean distance with four independent accumulators, which lets
/// the compiler vectorize the loop.
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Indices of the `k` training rows nearest to `q`, nearest first.
pub(super) fn nearest(train: ArrayView2<f64>, q: &[f64], k: usize) -> Vec<usize> {
    let mut dist: Vec<(f64, usize)> = match (train.as_slice(), train.ncols()) {
        (Some(flat), d) if d > 0 => flat
            .chunks_exact(d)
            .enumerate()
            .map(|(i, row)| (sq_dist(row, q), i))
            .collect(),
        _ => train
            .outer_iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect(),
    };
    let k = k.min(dist.len());
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_distance_then_index);
        dist.truncate(k);
    }
    dist.sort_unstable_by(by_distance_then_index);
    dist.into_iter().map(|(_, i)| i).collect()
}
