//! Per-class sample weighting shared by the forest and the linear head.

use serde::{Deserialize, Serialize};

use crate::class::{DocClass, N_CLASSES};

/// How training samples are weighted by class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeights {
    Uniform,
    /// `w_c = N / (5 n_c)`; classes absent from the data get weight 1.
    #[default]
    InverseFrequency,
    Explicit([f64; N_CLASSES]),
}

impl ClassWeights {
    /// Resolve to concrete per-class weights for a label distribution.
    pub fn resolve(&self, labels: impl IntoIterator<Item = DocClass>) -> [f64; N_CLASSES] {
        match *self {
            ClassWeights::Uniform => [1.0; N_CLASSES],
            ClassWeights::Explicit(w) => w,
            ClassWeights::InverseFrequency => {
                let mut counts = [0u64; N_CLASSES];
                for label in labels {
                    counts[label.index()] += 1;
                }
                inverse_frequency(&counts)
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let ClassWeights::Explicit(w) = self {
            if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(format!("class weights must be finite and > 0, got {w:?}"));
            }
        }
        Ok(())
    }
}

/// `w_c = N / (5 n_c)` from raw class counts.
pub fn inverse_frequency(counts: &[u64; N_CLASSES]) -> [f64; N_CLASSES] {
    let total: u64 = counts.iter().sum();
    let mut weights = [1.0; N_CLASSES];
    for (w, &n) in weights.iter_mut().zip(counts) {
        if n > 0 {
            *w = total as f64 / (N_CLASSES as f64 * n as f64);
        }
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::published::PUBLISHED_CLASS_COUNTS;

    #[test]
    fn inverse_frequency_on_published_distribution() {
        let w = inverse_frequency(&PUBLISHED_CLASS_COUNTS);
        // N = 401,737
        assert!((w[DocClass::SystematicReview.index()] - 0.2809).abs() < 1e-4);
        assert!((w[DocClass::Excluded.index()] - 13.18).abs() < 1e-2);
        let total: u64 = PUBLISHED_CLASS_COUNTS.iter().sum();
        assert_eq!(total, 401_737);
    }

    #[test]
    fn absent_classes_get_unit_weight() {
        let labels = [DocClass::PrimaryRct, DocClass::PrimaryRct, DocClass::Excluded];
        let w = ClassWeights::InverseFrequency.resolve(labels);
        assert_eq!(w[0], 1.0);
        assert!((w[DocClass::PrimaryRct.index()] - 0.3).abs() < 1e-12);
        assert!((w[DocClass::Excluded.index()] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn explicit_weights_are_validated() {
        assert!(ClassWeights::Explicit([1.0, 1.0, 0.0, 1.0, 1.0]).validate().is_err());
        assert!(ClassWeights::Explicit([1.0; 5]).validate().is_ok());
    }
}
