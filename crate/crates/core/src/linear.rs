//! Multinomial logistic regression over dense embeddings.
//!
//! Parameters start at zero and are fitted with plain mini-batch gradient
//! descent on the class-weighted mean cross-entropy plus an L2 penalty on
//! the weight matrix (the bias is not penalised). Batches are drawn from a
//! ChaCha8 shuffle seeded once per training run.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{DocClass, N_CLASSES};
use crate::embed::DenseEmbedding;
use crate::prediction::PredictionResult;
use crate::weights::ClassWeights;

pub const LINEAR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("corrupt linear model: {0}")]
    Corrupt(String),
    #[error("unsupported linear model format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearHyperParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_lambda: f64,
    pub seed: u64,
    pub class_weights: ClassWeights,
}

impl Default for LinearHyperParams {
    fn default() -> Self {
        LinearHyperParams {
            learning_rate: 0.1,
            epochs: 50,
            batch_size: 64,
            l2_lambda: 1e-4,
            seed: 0,
            class_weights: ClassWeights::InverseFrequency,
        }
    }
}

impl LinearHyperParams {
    pub fn validate(&self) -> Result<(), LinearError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(LinearError::InvalidParams("learning_rate must be > 0".into()));
        }
        if self.batch_size < 1 {
            return Err(LinearError::InvalidParams("batch_size must be >= 1".into()));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(LinearError::InvalidParams("l2_lambda must be >= 0".into()));
        }
        self.class_weights.validate().map_err(LinearError::InvalidParams)
    }
}

/// Weights are stored row-major, one row of `dimension` values per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: [f64; N_CLASSES],
    dimension: usize,
    hyperparams: LinearHyperParams,
}

/// Gradient with the same layout as [`LinearModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: [f64; N_CLASSES],
}

impl LinearModel {
    pub fn zeros(dimension: usize, hyperparams: LinearHyperParams) -> Self {
        LinearModel {
            weights: vec![0.0; N_CLASSES * dimension],
            bias: [0.0; N_CLASSES],
            dimension,
            hyperparams,
        }
    }

    pub fn from_parameters(
        weights: Vec<f64>,
        bias: [f64; N_CLASSES],
        hyperparams: LinearHyperParams,
    ) -> Result<Self, LinearError> {
        if weights.is_empty() || weights.len() % N_CLASSES != 0 {
            return Err(LinearError::Corrupt(format!(
                "weight count {} is not a positive multiple of {N_CLASSES}",
                weights.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(LinearError::Corrupt("non-finite parameter".into()));
        }
        Ok(LinearModel {
            dimension: weights.len() / N_CLASSES,
            weights,
            bias,
            hyperparams,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_row(&self, class: DocClass) -> &[f64] {
        let d = self.dimension;
        &self.weights[class.index() * d..(class.index() + 1) * d]
    }

    pub fn bias(&self) -> &[f64; N_CLASSES] {
        &self.bias
    }

    pub fn hyperparams(&self) -> &LinearHyperParams {
        &self.hyperparams
    }

    pub fn predict(&self, e: &DenseEmbedding) -> Result<PredictionResult, LinearError> {
        forward(self, e)
    }

    fn logits(&self, x: &[f64]) -> [f64; N_CLASSES] {
        let mut z = self.bias;
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.weights[k * self.dimension..(k + 1) * self.dimension];
            *zk += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    fn check_dimension(&self, e: &DenseEmbedding) -> Result<(), LinearError> {
        if e.dimension() != self.dimension {
            return Err(LinearError::DimensionMismatch {
                expected: self.dimension,
                actual: e.dimension(),
            });
        }
        Ok(())
    }

    fn apply(&mut self, grad: &Gradient, learning_rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= learning_rate * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= learning_rate * g;
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, provider_identity: &str) -> Result<(), LinearError> {
        let file = LinearFile {
            format_version: LINEAR_FORMAT_VERSION,
            dimension: self.dimension,
            provider: provider_identity.to_string(),
            hyperparams: self.hyperparams.clone(),
            weights: self.weights.chunks(self.dimension).map(<[f64]>::to_vec).collect(),
            bias: self.bias,
        };
        let mut text = serde_json::to_string(&file)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Returns the model and the embedding-provider identity it was trained
    /// against.
    pub fn load(path: impl AsRef<Path>) -> Result<(LinearModel, String), LinearError> {
        let file: LinearFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        if file.format_version != LINEAR_FORMAT_VERSION {
            return Err(LinearError::UnsupportedVersion(file.format_version));
        }
        if file.weights.len() != N_CLASSES
            || file.weights.iter().any(|row| row.len() != file.dimension)
        {
            return Err(LinearError::Corrupt(format!(
                "weights must be {N_CLASSES} rows of {} values",
                file.dimension
            )));
        }
        let model = LinearModel::from_parameters(
            file.weights.concat(),
            file.bias,
            file.hyperparams,
        )?;
        Ok((model, file.provider))
    }
}

#[derive(Serialize, Deserialize)]
struct LinearFile {
    format_version: u32,
    dimension: usize,
    provider: String,
    hyperparams: LinearHyperParams,
    weights: Vec<Vec<f64>>,
    bias: [f64; N_CLASSES],
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_CLASSES];
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

pub fn forward(model: &LinearModel, e: &DenseEmbedding) -> Result<PredictionResult, LinearError> {
    model.check_dimension(e)?;
    Ok(PredictionResult::from_probabilities(softmax(
        &model.logits(e.values()),
    )))
}

/// Mean cross-entropy plus `(l2_lambda / 2) ||W||^2`, and its exact gradient.
pub fn loss_and_grad(
    model: &LinearModel,
    batch: &[(DenseEmbedding, DocClass)],
) -> Result<(f64, Gradient), LinearError> {
    weighted_loss_and_grad(model, batch, &[1.0; N_CLASSES])
}

/// Like [`loss_and_grad`], but each sample's cross-entropy term is weighted
/// by its class weight and the sum divided by the total weight.
pub fn weighted_loss_and_grad(
    model: &LinearModel,
    batch: &[(DenseEmbedding, DocClass)],
    class_weights: &[f64; N_CLASSES],
) -> Result<(f64, Gradient), LinearError> {
    let refs: Vec<&(DenseEmbedding, DocClass)> = batch.iter().collect();
    loss_and_grad_refs(model, &refs, class_weights)
}

fn loss_and_grad_refs(
    model: &LinearModel,
    batch: &[&(DenseEmbedding, DocClass)],
    class_weights: &[f64; N_CLASSES],
) -> Result<(f64, Gradient), LinearError> {
    if batch.is_empty() {
        return Err(LinearError::EmptyDataset);
    }
    let d = model.dimension;
    let mut grad = Gradient {
        weights: vec![0.0; N_CLASSES * d],
        bias: [0.0; N_CLASSES],
    };
    let total_weight: f64 = batch.iter().map(|(_, c)| class_weights[c.index()]).sum();
    let mut loss = 0.0;
    for (e, class) in batch {
        model.check_dimension(e)?;
        let x = e.values();
        let p = softmax(&model.logits(x));
        let w = class_weights[class.index()] / total_weight;
        loss -= w * p[class.index()].ln();
        for k in 0..N_CLASSES {
            let indicator = if k == class.index() { 1.0 } else { 0.0 };
            let delta = w * (p[k] - indicator);
            grad.bias[k] += delta;
            for (g, v) in grad.weights[k * d..(k + 1) * d].iter_mut().zip(x) {
                *g += delta * v;
            }
        }
    }
    let lambda = model.hyperparams.l2_lambda;
    if lambda > 0.0 {
        loss += 0.5 * lambda * model.weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad.weights.iter_mut().zip(&model.weights) {
            *g += lambda * w;
        }
    }
    Ok((loss, grad))
}

pub fn train_linear(
    dataset: &[(DenseEmbedding, DocClass)],
    hyperparams: &LinearHyperParams,
) -> Result<LinearModel, LinearError> {
    train_linear_with_history(dataset, hyperparams).map(|(model, _)| model)
}

/// Train and also return the full-dataset weighted loss before training
/// and after each epoch.
pub fn train_linear_with_history(
    dataset: &[(DenseEmbedding, DocClass)],
    hyperparams: &LinearHyperParams,
) -> Result<(LinearModel, Vec<f64>), LinearError> {
    hyperparams.validate()?;
    let Some(first) = dataset.first() else {
        return Err(LinearError::EmptyDataset);
    };
    let dimension = first.0.dimension();
    if let Some((e, _)) = dataset.iter().find(|(e, _)| e.dimension() != dimension) {
        return Err(LinearError::DimensionMismatch {
            expected: dimension,
            actual: e.dimension(),
        });
    }
    let class_weights = hyperparams
        .class_weights
        .resolve(dataset.iter().map(|(_, c)| *c));
    let mut model = LinearModel::zeros(dimension, hyperparams.clone());
    let all: Vec<&(DenseEmbedding, DocClass)> = dataset.iter().collect();
    let mut history = vec![loss_and_grad_refs(&model, &all, &class_weights)?.0];

    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch = Vec::with_capacity(hyperparams.batch_size);
    for epoch in 1..=hyperparams.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyperparams.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &dataset[i]));
            let (loss, grad) = loss_and_grad_refs(&model, &batch, &class_weights)?;
            if !loss.is_finite() {
                return Err(LinearError::Divergence { epoch });
            }
            model.apply(&grad, hyperparams.learning_rate);
        }
        let (loss, _) = loss_and_grad_refs(&model, &all, &class_weights)?;
        if !loss.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(LinearError::Divergence { epoch });
        }
        history.push(loss);
    }
    Ok((model, history))
}
