//! Drives `ebcf fit --folds 2` through the binary on Gaussian data with a fixed,
//! adversarial mean vector and checks that it beats `mu_hat = Z` on average.

use std::fmt::Write as _;
use std::fs;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

#[test]
fn fit_with_two_folds_dominates_unbiased() {
    let n = 20;
    let reps = 20_000;
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let mu: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 5.0 } else { -5.0 }).collect();
    let data = dir.path().join("d.csv");
    let out = dir.path().join("e.csv");

    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for r in 0..reps {
        let mut text = String::from("x0,z,sigma,mu\n");
        for i in 0..n {
            let z = mu[i] + rng.sample::<f64, _>(StandardNormal);
            writeln!(text, "{},{z},1,{}", x[i], mu[i]).unwrap();
        }
        fs::write(&data, text).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_ebcf"))
            .args(["fit", data.to_str().unwrap(), "--folds", "2", "--backend", "ols"])
            .args(["--seed", &r.to_string(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let est = fs::read_to_string(&out).unwrap();
        let mut lines = est.lines();
        let col = lines.next().unwrap().split(',').position(|h| h == "sq_error").unwrap();
        let mse = lines
            .map(|l| l.split(',').nth(col).unwrap().parse::<f64>().unwrap())
            .sum::<f64>()
            / n as f64;
        sum += mse;
        sum_sq += mse * mse;
    }
    let mean = sum / reps as f64;
    let se = ((sum_sq / reps as f64 - mean * mean) / (reps - 1) as f64).sqrt();
    assert!(1.0 - mean > 3.0 * se, "compound MSE {mean} (SE {se})");
}
