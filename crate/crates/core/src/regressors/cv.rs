use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;

use super::knn::nearest;
use crate::crossfit::make_folds;
use crate::error::{Error, Result};

/// Outcome of choosing `k` for k-NN by cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    /// Evaluated candidates, ascending.
    pub candidate_ks: Vec<usize>,
    /// Mean held-out squared error per evaluated candidate.
    pub cv_scores: Vec<f64>,
    pub chosen_k: usize,
    /// Candidates larger than the smallest training fold, not evaluated.
    pub skipped: Vec<usize>,
}

/// Picks the candidate `k` with the lowest pooled held-out squared error over
/// `n_folds` folds; ties go to the smaller `k`.
pub fn cv_select_k(
    candidates: &[usize],
    x: ArrayView2<f64>,
    z: &[f64],
    n_folds: usize,
    seed: u64,
) -> Result<CvSelection> {
    let n = z.len();
    if x.nrows() != n {
        return Err(Error::domain(format!("{} covariate rows but {n} responses", x.nrows())));
    }
    if candidates.is_empty() {
        return Err(Error::domain("no candidate k values"));
    }
    if n_folds < 2 {
        return Err(Error::domain(format!("cross-validation needs >= 2 folds, got {n_folds}")));
    }
    let folds = make_folds(n, n_folds, seed)?;
    let min_train = n - folds.sizes().into_iter().max().unwrap_or(0);

    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let (usable, skipped): (Vec<usize>, Vec<usize>) =
        sorted.into_iter().partition(|&k| k >= 1 && k <= min_train);
    for k in &skipped {
        log::warn!("k = {k} skipped: smallest training fold has {min_train} units");
    }
    if usable.is_empty() {
        return Err(Error::domain(format!(
            "every candidate k exceeds the smallest training fold ({min_train} units)"
        )));
    }
    let k_max = *usable.last().expect("nonempty");

    // Sum of squared errors per candidate, accumulated fold by fold.
    let per_fold: Vec<Vec<f64>> = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let held = folds.members(f);
            let train = folds.complement(f);
            let xt = x.select(Axis(0), &train);
            let mut sse = vec![0.0; usable.len()];
            for &i in &held {
                let q = x.row(i).to_vec();
                let nn = nearest(xt.view(), &q, k_max);
                let mut cum = 0.0;
                let mut next = 0;
                for (rank, &j) in nn.iter().enumerate() {
                    cum += z[train[j]];
                    while next < usable.len() && usable[next] == rank + 1 {
                        let e = z[i] - cum / (rank + 1) as f64;
                        sse[next] += e * e;
                        next += 1;
                    }
                }
            }
            sse
        })
        .collect();

    let mut cv_scores = vec![0.0; usable.len()];
    for fold in &per_fold {
        for (s, v) in cv_scores.iter_mut().zip(fold) {
            *s += v;
        }
    }
    for s in cv_scores.iter_mut() {
        *s /= n as f64;
    }
    let best = cv_scores
        .iter()
        .enumerate()
        .fold(0, |b, (j, s)| if *s < cv_scores[b] { j } else { b });

    Ok(CvSelection {
        chosen_k: usable[best],
        candidate_ks: usable,
        cv_scores,
        skipped,
    })
}
