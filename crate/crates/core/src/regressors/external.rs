use std::collections::HashMap;

use crate::error::{Error, Result};

/// Precomputed predictions keyed by 0-based unit index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionTable {
    predictions: HashMap<usize, f64>,
}

impl PredictionTable {
    /// Rejects duplicate indices and non-finite predictions.
    pub fn from_pairs<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> Result<Self> {
        let mut predictions = HashMap::new();
        for (index, value) in pairs {
            if !value.is_finite() {
                return Err(Error::domain(format!("prediction for index {index} is not finite")));
            }
            if predictions.insert(index, value).is_some() {
                return Err(Error::domain(format!("duplicate prediction index {index}")));
            }
        }
        Ok(Self { predictions })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<f64> {
        self.predictions
            .get(&index)
            .copied()
            .ok_or(Error::MissingPrediction { index })
    }

    pub fn lookup_all(&self, indices: &[usize]) -> Result<Vec<f64>> {
        indices.iter().map(|&i| self.get(i)).collect()
    }

    /// Entries sorted by index.
    pub fn entries(&self) -> Vec<(usize, f64)> {
        let mut e: Vec<(usize, f64)> = self.predictions.iter().map(|(k, v)| (*k, *v)).collect();
        e.sort_unstable_by_key(|(k, _)| *k);
        e
    }
}
