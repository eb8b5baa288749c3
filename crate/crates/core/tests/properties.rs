//! Statistical properties of the public API, checked by simulation.

use ebcf::io::{read_dataset, write_dataset};
use ebcf::oracle::{bayes_risk_brown, bayes_risk_mc, MixturePrior};
use ebcf::quadrature::gauss_hermite;
use ebcf::regressors::Backend;
use ebcf::rng::{child_seed, substream};
use ebcf::shrinkage::{bayes_shrink, SureObjective};
use ebcf::simulate::draw_hierarchical;
use ebcf::stats::RunningStats;
use ebcf::{ebcf_fit, Dataset, HierarchicalSpec};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn compound_mse(est: &[f64], mu: &[f64]) -> f64 {
    est.iter().zip(mu).map(|(e, m)| (e - m).powi(2)).sum::<f64>() / mu.len() as f64
}

#[test]
fn sure_is_unbiased_under_gaussian_noise() {
    let n = 40;
    let mut base = substream(21, &[]);
    let mu: Vec<f64> = (0..n).map(|_| base.random_range(-4.0..4.0)).collect();
    let m_hat: Vec<f64> = mu.iter().map(|m| 0.5 * m + base.random_range(-1.0..1.0)).collect();
    let sigma2: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 4.0 } else { 1.0 }).collect();
    for a in [0.0, 1.0, 6.0] {
        let diffs: RunningStats = (0..10_000u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(22, &[r]);
                let z: Vec<f64> = (0..n)
                    .map(|i| mu[i] + sigma2[i].sqrt() * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let resid = z.iter().zip(&m_hat).map(|(z, m)| z - m).collect();
                let sure = SureObjective::new(resid, sigma2.clone()).unwrap().value(a).unwrap();
                let est: Vec<f64> = (0..n).map(|i| bayes_shrink(m_hat[i], z[i], a, sigma2[i]).unwrap()).collect();
                sure - compound_mse(&est, &mu)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        let e = diffs.estimate();
        assert!(e.within(0.0, 4.0), "A={a}: {e:?}");
    }
}

fn domination_check(mu: &[f64], x: &Array2<f64>, backend: &Backend, n_folds: usize, seed: u64) {
    let n = mu.len();
    let losses: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|r| {
            let s = child_seed(seed, &[r]);
            let mut rng = substream(s, &[]);
            let data = Dataset {
                index: (0..n).collect(),
                x: x.clone(),
                z: mu.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect(),
                sigma: vec![1.0; n],
                mu: None,
            };
            compound_mse(&ebcf_fit(&data, backend, n_folds, s).unwrap().estimates, mu)
        })
        .collect();
    let e: RunningStats = losses.into_iter().collect();
    let e = e.estimate();
    assert!(1.0 - e.mean > 3.0 * e.std_error, "{backend:?}: {e:?}");
}

#[test]
fn james_stein_domination_on_adversarial_means() {
    let mut rng = substream(31, &[]);
    // Means unrelated to the covariates.
    let x = Array2::from_shape_fn((20, 3), |_| rng.random::<f64>());
    let alternating: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 5.0 } else { -5.0 }).collect();
    domination_check(&alternating, &x, &Backend::Knn { k: 3 }, 2, 1);
    let far: Vec<f64> = (0..20).map(|i| 100.0 + (i % 4) as f64).collect();
    domination_check(&far, &x, &Backend::Ols { intercept: true }, 2, 2);
    // A single large outlier among zeros.
    let mut spike = vec![0.0; 25];
    spike[7] = 30.0;
    let x5 = Array2::from_shape_fn((25, 2), |_| rng.random::<f64>());
    domination_check(&spike, &x5, &Backend::Knn { k: 5 }, 5, 3);
    // Means anti-correlated with a covariate the regression can half-learn.
    let xs = Array2::from_shape_fn((30, 1), |(i, _)| i as f64 / 30.0);
    let wiggle: Vec<f64> = (0..30).map(|i| 4.0 * (i as f64 * 2.1).sin() - 3.0 * i as f64 / 30.0).collect();
    domination_check(&wiggle, &xs, &Backend::Ols { intercept: true }, 3, 4);
}

#[test]
fn compound_risk_within_regression_envelope() {
    // MSE(EBCF) <= sigma^2 q / (sigma^2 + q) + c / sqrt(n), with q the
    // regression's MSE against mu measured on the same runs.
    let spec = HierarchicalSpec::friedman(1.0, 2.0).unwrap();
    let s2 = 4.0;
    let c = 5.0;
    for n in [500usize, 2000] {
        let runs: Vec<(f64, f64)> = (0..20u64)
            .map(|r| {
                let data = draw_hierarchical(&spec, n, child_seed(41, &[n as u64, r])).unwrap();
                let mu = data.mu.as_ref().unwrap();
                let fit = ebcf_fit(&data, &Backend::Knn { k: 20 }, 2, r).unwrap();
                (compound_mse(&fit.estimates, mu), compound_mse(&fit.m_hat, mu))
            })
            .collect();
        let risk = runs.iter().map(|r| r.0).sum::<f64>() / runs.len() as f64;
        let q = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
        let envelope = s2 * q / (s2 + q) + c / (n as f64).sqrt();
        assert!(risk <= envelope, "n={n}: {risk} vs {envelope} (q = {q})");
        assert!(risk < s2);
    }
}

#[test]
fn brown_consistency_for_random_priors() {
    let mut rng = substream(51, &[]);
    for j in 0..50u64 {
        let p = MixturePrior::new(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(0.0..3.0),
        )
        .unwrap();
        let s2 = rng.random_range(0.1..4.0);
        let brown = bayes_risk_brown(&p, s2).unwrap();
        assert!((0.0..=s2).contains(&brown));
        let mc = bayes_risk_mc(&p, s2, 100_000, 500 + j).unwrap();
        assert!(mc.within(brown, 4.0), "prior {j}: {brown} vs {mc:?}");
    }
}

#[test]
fn gauss_hermite_matches_reference_nodes() {
    // Largest nodes and weight sums from an independent implementation.
    for (n, largest) in [(5usize, 2.0201828704560856), (20, 5.387480890011233), (201, 19.38970039958089)] {
        let (x, w) = gauss_hermite(n).unwrap();
        assert!((x[0] - largest).abs() < 1e-12 * largest, "n={n}: {}", x[0]);
        assert!((w.iter().sum::<f64>() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }
}

#[test]
fn csv_round_trip_preserves_fit() {
    let spec = HierarchicalSpec::friedman(4.0, 2.0).unwrap();
    let data = draw_hierarchical(&spec, 300, 61).unwrap();
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    let back = read_dataset(buf.as_slice()).unwrap();
    let backend = Backend::KnnCv {
        candidates: vec![5, 10, 20],
        n_folds: 5,
        seed: 1,
    };
    let a = ebcf_fit(&data, &backend, 5, 9).unwrap();
    let b = ebcf_fit(&back, &backend, 5, 9).unwrap();
    assert_eq!(a.estimates, b.estimates);
}
