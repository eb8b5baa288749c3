use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use ebcf::HierarchicalSpec;

/// Default k-NN candidates for cross-validated k selection.
pub const DEFAULT_KNN_KS: [usize; 5] = [5, 10, 20, 40, 80];

/// Every setting a run depends on. Command-line flags override values loaded
/// with `--config`, which override these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub folds: usize,
    /// `knn`, `ols` or `external`.
    pub backend: String,
    pub knn_ks: Vec<usize>,
    pub out: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub inverse_vst: bool,
    /// Scenario preset for `simulate` and `compare`.
    pub preset: String,
    /// Overrides of the preset's prior variance and noise sd.
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    /// Sample sizes (`simulate` uses the first).
    pub n: Vec<usize>,
    pub replicates: usize,
    /// Down-sampling population.
    pub b: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            folds: ebcf::crossfit::DEFAULT_FOLDS,
            backend: "knn".into(),
            knn_ks: DEFAULT_KNN_KS.to_vec(),
            out: None,
            predictions: None,
            inverse_vst: false,
            preset: "friedman".into(),
            a: None,
            sigma: None,
            n: vec![1000],
            replicates: 50,
            b: 200,
        }
    }
}

/// `(A, sigma)` of a named Friedman scenario.
pub fn preset_parameters(name: &str) -> Option<(f64, f64)> {
    match name {
        "friedman" | "fig2b" => Some((4.0, 2.0)),
        "fig2a" => Some((0.0, 2.0)),
        "fig2c" => Some((9.0, 2.0)),
        _ => None,
    }
}

impl RunConfig {
    pub fn scenario(&self) -> Result<HierarchicalSpec, String> {
        let (a, sigma) = preset_parameters(&self.preset).ok_or_else(|| {
            format!("unknown preset `{}` (expected friedman, fig2a, fig2b or fig2c)", self.preset)
        })?;
        HierarchicalSpec::friedman(self.a.unwrap_or(a), self.sigma.unwrap_or(sigma)).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            seed: u64::MAX,
            knn_ks: vec![3, 7],
            out: Some("a/b.csv".into()),
            a: Some(0.1 + 0.2),
            n: vec![250, 1000, 4000],
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        let def: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(def, RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn presets() {
        let mut cfg = RunConfig::default();
        for (name, a) in [("fig2a", 0.0), ("fig2b", 4.0), ("fig2c", 9.0)] {
            cfg.preset = name.into();
            let s = cfg.scenario().unwrap();
            assert_eq!(s.prior_variance(), a);
            assert_eq!(s.constant_sigma(), Some(2.0));
        }
        cfg.preset = "nope".into();
        assert!(cfg.scenario().is_err());
    }
}
