//! Classifier output shared by both backends.

use serde::{Deserialize, Serialize};

use crate::class::{DocClass, N_CLASSES};

/// Predicted class, the full class distribution, and its entropy in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub predicted: DocClass,
    pub probabilities: [f64; N_CLASSES],
    pub entropy: f64,
}

impl PredictionResult {
    /// Derive `predicted` (argmax, ties to the lowest class index) and the
    /// entropy from a normalised distribution.
    pub fn from_probabilities(probabilities: [f64; N_CLASSES]) -> Self {
        let mut best = 0;
        for (i, &p) in probabilities.iter().enumerate().skip(1) {
            if p > probabilities[best] {
                best = i;
            }
        }
        PredictionResult {
            predicted: DocClass::ALL[best],
            probabilities,
            entropy: entropy(&probabilities),
        }
    }

    /// Highest class probability.
    pub fn confidence(&self) -> f64 {
        self.probabilities[self.predicted.index()]
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(probabilities: &[f64]) -> f64 {
    let sum: f64 = probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum();
    // `0.0 - x` rather than `-x` so a certain prediction gives +0.0.
    0.0 - sum
}
