use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ebcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebcf"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["simulate", "--out", path_str(&out)];
    args.extend_from_slice(extra);
    let o = ebcf(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn simulate_friedman_preset() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.csv", &["--preset", "friedman", "--n", "100", "--prior-variance", "4", "--sigma", "2", "--seed", "9"]);
    let b = simulate(dir.path(), "b.csv", &["--preset", "friedman", "--n", "100", "--prior-variance", "4", "--sigma", "2", "--seed", "9"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (header, rows) = csv_rows(&a);
    assert_eq!(rows.len(), 100);
    assert!(header.len() >= 18);
    for name in ["x0", "x14", "z", "sigma", "mu"] {
        assert!(header.iter().any(|h| h == name));
    }
    assert!(column(&header, &rows, "sigma").iter().all(|s| *s == 2.0));
}

#[test]
fn simulate_prints_seed_and_rejects_empty() {
    let o = ebcf(&["simulate", "--n", "3", "--seed", "42"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("seed=42"));
    let o = ebcf(&["simulate", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("\nerror_code=2\nerror: "), "{}", stderr(&o));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(ebcf(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(ebcf(&["simulate", "--preset", "nope"]).status.code(), Some(2));
    let o = ebcf(&["simulate", "--n", "5", "--out", "/nonexistent-dir/x.csv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error_code="));
}

#[test]
fn fit_constant_z_returns_constant() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("const.csv");
    let mut text = String::from("x0,z,sigma\n");
    for i in 0..30 {
        text.push_str(&format!("{},{},1\n", i as f64 / 10.0, 3.5));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("est.csv");
    let o = ebcf(&["fit", path_str(&data), "--out", path_str(&out), "--knn-ks", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["index", "z", "m_hat", "A_hat_fold", "mu_hat"]);
    assert!(column(&header, &rows, "mu_hat").iter().all(|v| *v == 3.5));
}

#[test]
fn fit_fig2b_beats_unbiased() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "d.csv", &["--preset", "fig2b", "--n", "1000", "--seed", "5"]);
    let out = dir.path().join("est.csv");
    let o = ebcf(&["fit", path_str(&data), "--out", path_str(&out), "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    let sq = column(&header, &rows, "sq_error");
    let mse = sq.iter().sum::<f64>() / sq.len() as f64;
    assert!(mse < 4.0, "mse {mse}");
    let err = stderr(&o);
    assert!(err.contains("mse=") && err.contains("se="));
    assert_eq!(err.matches("fold=").count(), 5);
}

#[test]
fn fit_is_reproducible_and_threads_do_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "d.csv", &["--n", "200", "--seed", "2"]);
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_ebcf"))
            .args(["fit", path_str(&data), "--out", path_str(&out), "--seed", "3"])
            .env("EBCF_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("3", "b.csv"));
}

#[test]
fn fit_heteroskedastic_ols() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("h.csv");
    let mut text = String::from("x0,x1,z,sigma,mu\n");
    for i in 0..60 {
        let (x0, x1) = ((i % 7) as f64, (i % 5) as f64 * 0.3);
        let mu = 1.0 + x0 - 2.0 * x1;
        let s = if i % 2 == 0 { 1.0 } else { 2.0 };
        let z = mu + s * (((i * 37) % 11) as f64 / 11.0 - 0.5);
        text.push_str(&format!("{x0},{x1},{z},{s},{mu}\n"));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("est.csv");
    let o = ebcf(&["fit", path_str(&data), "--backend", "ols", "--folds", "3", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stderr(&o).matches("A_hat=").count(), 3);
    let (header, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 60);
    assert!(header.contains(&"sq_error".to_string()));
}

#[test]
fn fit_external_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "index,z,sigma\n10,1,1\n11,2,1\n12,3,1\n13,4,1\n14,5,1\n15,6,1\n").unwrap();
    let preds = dir.path().join("p.csv");
    fs::write(&preds, "index,prediction\n10,1\n11,2\n12,3\n13,4\n14,5\n15,6\n").unwrap();
    let out = dir.path().join("est.csv");
    let o = ebcf(&["fit", path_str(&data), "--backend", "external", "--predictions", path_str(&preds), "--folds", "2", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(column(&header, &rows, "mu_hat"), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

    fs::write(&preds, "index,prediction\n10,1\n").unwrap();
    let o = ebcf(&["fit", path_str(&data), "--backend", "external", "--predictions", path_str(&preds), "--folds", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let o = ebcf(&["fit", path_str(&data), "--backend", "external", "--folds", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_reports_bad_data_and_fold_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "z,sigma\n1,1\n2,\n").unwrap();
    let o = ebcf(&["fit", path_str(&data)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));

    fs::write(&data, "z,sigma\n1,1\n2,1\n3,1\n").unwrap();
    let o = ebcf(&["fit", path_str(&data), "--folds", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fewer folds"));
}

#[test]
fn fit_inverse_vst_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let mut text = String::from("x0,z,sigma\n");
    for i in 0..20 {
        text.push_str(&format!("{i},{},0.5\n", if i % 4 == 0 { -0.3 } else { 0.2 }));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("est.csv");
    let o = ebcf(&["fit", path_str(&data), "--inverse-vst", "--knn-ks", "3", "--folds", "2", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    let mu = column(&header, &rows, "mu_hat");
    let p = column(&header, &rows, "p_hat");
    for (m, p) in mu.iter().zip(&p) {
        assert_eq!(*p, m * m);
    }
    assert!(stderr(&o).contains("negative_mu_hat="));
}

#[test]
fn downsample_counts() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("c.csv");
    fs::write(&counts, "events,population,income\n0,1000,1.5\n30,800,2\n250,500,0.3\n400,400,1\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = ebcf(&["downsample", path_str(&counts), "--b", "200", "--seed", "4", "--out", path_str(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a.csv");
    assert_eq!(fs::read(&a).unwrap(), fs::read(run("b.csv")).unwrap());
    let (header, rows) = csv_rows(&a);
    let sigma = column(&header, &rows, "sigma");
    assert!(sigma.iter().all(|s| (*s - 1.0 / (2.0 * 200f64.sqrt())).abs() < 1e-15));
    let z = column(&header, &rows, "z");
    assert_eq!(z[0], 0.0);
    assert_eq!(z[3], 1.0);
    assert_eq!(column(&header, &rows, "x0"), vec![1.5, 2.0, 0.3, 1.0]);
    assert_eq!(column(&header, &rows, "mu")[2], 0.5f64.sqrt());

    fs::write(&counts, "events,population\n5,1000\n1,150\n").unwrap();
    let o = ebcf(&["downsample", path_str(&counts), "--b", "200"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn compare_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("risk.csv");
    let o = ebcf(&["compare", "--preset", "fig2c", "--n", "100,200", "--replicates", "2", "--knn-ks", "10", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["estimator", "n", "A", "sigma", "mse", "rmse", "se", "replicates"]);
    assert_eq!(rows.len(), 8);
    assert!(column(&header, &rows, "se").iter().all(|v| v.is_finite()));
    assert!(rows.iter().all(|r| r[2] == "9" && r[3] == "2"));
    assert_eq!(ebcf(&["compare", "--replicates", "1", "--n", "50"]).status.code(), Some(2));
}

#[test]
fn compare_fig2c_unbiased_rmse_is_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("risk.csv");
    let o = ebcf(&["compare", "--preset", "fig2c", "--n", "250", "--replicates", "20", "--knn-ks", "10", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out);
    let i = rows.iter().position(|r| r[0] == "unbiased").unwrap();
    let rmse = column(&header, &rows, "rmse")[i];
    let se = column(&header, &rows, "se")[i] / (2.0 * rmse);
    assert!((rmse - 2.0).abs() <= 3.0 * se, "{rmse} {se}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"seed": 17, "n": [12], "preset": "fig2a"}"#).unwrap();
    let o = ebcf(&["simulate", "--config", path_str(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed=17"));
    assert_eq!(String::from_utf8(o.stdout.clone()).unwrap().lines().count(), 13);
    let o = ebcf(&["simulate", "--config", path_str(&cfg), "--seed", "1"]);
    assert!(stderr(&o).contains("seed=1\n"));
    fs::write(&cfg, r#"{"seeed": 1}"#).unwrap();
    assert_eq!(ebcf(&["simulate", "--config", path_str(&cfg)]).status.code(), Some(2));
}
