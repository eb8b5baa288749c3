//! `ebcf`: simulate, fit, down-sample and compare empirical Bayes estimators.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "ebcf", version, about = "Cross-fitted empirical Bayes shrinkage")]
struct Cli {
    /// Random seed (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a dataset from a Friedman scenario.
    Simulate(ScenarioArgs),
    /// Fit EBCF to a dataset CSV and write per-unit estimates.
    Fit(FitArgs),
    /// Hypergeometric down-sampling of count data plus the square-root transform.
    Downsample(DownsampleArgs),
    /// Monte Carlo risk comparison of the estimators.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// friedman, fig2a (A=0), fig2b (A=4) or fig2c (A=9); all with sigma=2.
    #[arg(long)]
    preset: Option<String>,
    /// Number of units.
    #[arg(long)]
    n: Option<usize>,
    /// Prior variance, overriding the preset.
    #[arg(long = "prior-variance", visible_alias = "A")]
    a: Option<f64>,
    /// Noise sd, overriding the preset.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct RegressionArgs {
    /// Number of cross-fitting folds (default 5).
    #[arg(long)]
    folds: Option<usize>,
    /// Regression backend: knn, ols or external.
    #[arg(long)]
    backend: Option<String>,
    /// k-NN candidates, comma separated; a single value disables cross-validation.
    #[arg(long, value_delimiter = ',')]
    knn_ks: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dataset CSV.
    data: PathBuf,
    #[command(flatten)]
    regression: RegressionArgs,
    /// `index,prediction` CSV for the external backend.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Also write `p_hat = mu_hat^2` (for square-root transformed rates).
    #[arg(long)]
    inverse_vst: bool,
}

#[derive(Args, Debug)]
struct DownsampleArgs {
    /// CSV with `events,population` and optional numeric covariates.
    counts: PathBuf,
    /// Target population B (default 200).
    #[arg(long = "b", visible_alias = "B")]
    b: Option<u64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long = "prior-variance", visible_alias = "A")]
    a: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    regression: RegressionArgs,
}

/// Failure with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ebcf::Error> for Failure {
    fn from(e: ebcf::Error) -> Self {
        use ebcf::Error::*;
        let code = match &e {
            Domain(_) => 2,
            Data { .. } | MissingPrediction { .. } | Csv(_) => 3,
            Numerical { .. } | Singular { .. } => 4,
            Io(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    let regression = |cfg: &mut RunConfig, r: &RegressionArgs| {
        if let Some(f) = r.folds {
            cfg.folds = f;
        }
        if let Some(b) = &r.backend {
            cfg.backend = b.clone();
        }
        if let Some(ks) = &r.knn_ks {
            cfg.knn_ks = ks.clone();
        }
    };
    match &cli.command {
        Command::Simulate(s) => {
            if let Some(p) = &s.preset {
                cfg.preset = p.clone();
            }
            if let Some(n) = s.n {
                cfg.n = vec![n];
            }
            cfg.a = s.a.or(cfg.a);
            cfg.sigma = s.sigma.or(cfg.sigma);
        }
        Command::Fit(f) => {
            regression(&mut cfg, &f.regression);
            if let Some(p) = &f.predictions {
                cfg.predictions = Some(p.clone());
            }
            cfg.inverse_vst |= f.inverse_vst;
        }
        Command::Downsample(d) => {
            if let Some(b) = d.b {
                cfg.b = b;
            }
        }
        Command::Compare(c) => {
            regression(&mut cfg, &c.regression);
            if let Some(p) = &c.preset {
                cfg.preset = p.clone();
            }
            if let Some(n) = &c.n {
                cfg.n = n.clone();
            }
            if let Some(r) = c.replicates {
                cfg.replicates = r;
            }
            cfg.a = c.a.or(cfg.a);
            cfg.sigma = c.sigma.or(cfg.sigma);
        }
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("EBCF_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::usage(format!("EBCF_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let cfg = load_config(&cli)?;
    eprintln!("seed={}", cfg.seed);
    match &cli.command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Fit(f) => commands::fit(&f.data, &cfg),
        Command::Downsample(d) => commands::downsample(&d.counts, &cfg),
        Command::Compare(_) => commands::compare(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error_code={}", f.code);
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
