use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ebcf::io::{read_counts, read_dataset, read_predictions, write_dataset};
use ebcf::oracle::{compare_estimators, EstimatorSet, RiskReport};
use ebcf::simulate::{
    draw_hierarchical, hypergeometric_downsample, inverse_vst_all, sqrt_vst, DownsampleSpec,
};
use ebcf::stats::RunningStats;
use ebcf::{ebcf_fit, Backend, Dataset};

use crate::config::RunConfig;
use crate::Failure;

fn open_output(cfg: &RunConfig) -> Result<Box<dyn Write>, Failure> {
    Ok(match &cfg.out {
        Some(path) => {
            let f = File::create(path)
                .map_err(|e| Failure::from(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure {
        code: 3,
        message: format!("cannot open {}: {e}", path.display()),
    })
}

fn backend(cfg: &RunConfig) -> Result<Backend, Failure> {
    match cfg.backend.as_str() {
        "knn" => match cfg.knn_ks.as_slice() {
            [] => Err(Failure::usage("--knn-ks needs at least one value")),
            [k] => Ok(Backend::Knn { k: *k }),
            ks => Ok(Backend::KnnCv {
                candidates: ks.to_vec(),
                n_folds: 5,
                seed: cfg.seed,
            }),
        },
        "ols" => Ok(Backend::Ols { intercept: true }),
        "external" => {
            let path = cfg
                .predictions
                .as_ref()
                .ok_or_else(|| Failure::usage("--backend external requires --predictions <csv>"))?;
            Ok(Backend::External(Arc::new(read_predictions(open_input(path)?)?)))
        }
        other => Err(Failure::usage(format!(
            "unknown backend `{other}` (expected knn, ols or external)"
        ))),
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let spec = cfg.scenario().map_err(Failure::usage)?;
    let n = match cfg.n.as_slice() {
        [n] => *n,
        _ => return Err(Failure::usage("simulate takes exactly one --n")),
    };
    if n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let data = draw_hierarchical(&spec, n, cfg.seed)?;
    let mut out = open_output(cfg)?;
    write_dataset(&data, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn fit(path: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let data: Dataset = read_dataset(open_input(path)?)?;
    let backend = backend(cfg)?;
    let result = ebcf_fit(&data, &backend, cfg.folds, cfg.seed)?;

    for (f, ff) in result.fold_fits.iter().enumerate() {
        let k = match &ff.model {
            ebcf::RegressionModel::Knn(m) => format!(" k={}", m.k()),
            _ => String::new(),
        };
        eprintln!(
            "fold={f} size={} A_hat={} mean_sq_residual={}{k}",
            ff.size, ff.prior_variance, ff.mean_sq_residual
        );
    }

    let p_hat = cfg.inverse_vst.then(|| inverse_vst_all(&result.estimates));
    let mut w = csv::Writer::from_writer(open_output(cfg)?);
    let mut header = vec!["index", "z", "m_hat", "A_hat_fold", "mu_hat"];
    if data.mu.is_some() {
        header.push("sq_error");
    }
    if p_hat.is_some() {
        header.push("p_hat");
    }
    w.write_record(&header).map_err(ebcf::Error::from)?;
    let mut errors = RunningStats::new();
    for i in 0..data.len() {
        let mut rec = vec![
            data.index[i].to_string(),
            data.z[i].to_string(),
            result.m_hat[i].to_string(),
            result.unit_prior_variance(i).to_string(),
            result.estimates[i].to_string(),
        ];
        if let Some(mu) = &data.mu {
            let e = (result.estimates[i] - mu[i]).powi(2);
            errors.push(e);
            rec.push(e.to_string());
        }
        if let Some((p, _)) = &p_hat {
            rec.push(p[i].to_string());
        }
        w.write_record(&rec).map_err(ebcf::Error::from)?;
    }
    w.flush()?;
    if data.mu.is_some() {
        let e = errors.estimate();
        eprintln!("mse={} se={}", e.mean, e.std_error);
    }
    if let Some((_, negatives)) = p_hat {
        eprintln!("negative_mu_hat={negatives}");
    }
    Ok(())
}

pub fn downsample(path: &Path, cfg: &RunConfig) -> Result<(), Failure> {
    let counts = read_counts(open_input(path)?)?;
    let spec = DownsampleSpec::new(cfg.b, counts.records.clone())?;
    let c = hypergeometric_downsample(&spec, cfg.seed)?;
    let mut z = Vec::with_capacity(c.len());
    let mut sigma = Vec::with_capacity(c.len());
    for &ci in &c {
        let (zi, si) = sqrt_vst(ci, cfg.b)?;
        z.push(zi);
        sigma.push(si);
    }
    let mu = counts
        .records
        .iter()
        .map(|r| (r.events as f64 / r.population as f64).sqrt())
        .collect();
    for (j, name) in counts.covariate_names.iter().enumerate() {
        eprintln!("x{j}={name}");
    }
    let data = Dataset {
        index: (0..c.len()).collect(),
        x: counts.covariates,
        z,
        sigma,
        mu: Some(mu),
    };
    let mut out = open_output(cfg)?;
    write_dataset(&data, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> Result<(), Failure> {
    let spec = cfg.scenario().map_err(Failure::usage)?;
    if cfg.n.is_empty() {
        return Err(Failure::usage("--n needs at least one sample size"));
    }
    let set = EstimatorSet {
        n_folds: cfg.folds,
        ..EstimatorSet::all(backend(cfg)?)
    };
    let reports = cfg
        .n
        .iter()
        .map(|&n| compare_estimators(&spec, n, cfg.replicates, &set, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    for rep in &reports {
        for row in &rep.rows {
            for (r, msg) in &row.failures {
                eprintln!("failed: estimator={} n={} replicate={r}: {msg}", row.estimator.name(), rep.n);
            }
        }
    }
    eprint!("{}", RiskReport::table(&reports));
    let out = open_output(cfg)?;
    RiskReport::write_csv(&reports, out)?;
    Ok(())
}
