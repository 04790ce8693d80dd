//! Random forest over sparse TF-IDF vectors.
//!
//! Each tree `t` draws its bootstrap sample and its per-node feature subsets
//! from a ChaCha8 stream seeded with `child_seed(seed, t)`
//! (see [`crate::hashing`]), so a forest is bit-identical for a given
//! dataset order and parameters no matter how trees are scheduled across
//! threads. Splits use weighted Gini impurity; leaves keep raw class counts,
//! and prediction averages the class-weighted leaf distributions over trees.

mod persist;
mod split;
mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{DocClass, N_CLASSES};
use crate::hashing::child_seed;
use crate::prediction::PredictionResult;
use crate::textpipe::SparseVector;
use crate::weights::ClassWeights;

pub use persist::{load_forest, save_forest, FOREST_FORMAT_VERSION};
pub use split::{best_split, best_split_min_leaf, gini, Split, WeightedSample, TIE_EPSILON};
pub use tree::{Node, Tree};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("gini impurity is undefined for an empty node")]
    EmptyNode,
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("model was trained with vocabulary {expected}, but vocabulary {found} was supplied")]
    VocabularyMismatch { expected: String, found: String },
    #[error("corrupt forest model: {0}")]
    Corrupt(String),
    #[error("unsupported forest format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per node; `None` means `ceil(sqrt(V))`.
    #[serde(default)]
    pub features_per_split: Option<usize>,
    pub seed: u64,
    pub class_weights: ClassWeights,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 16,
            min_samples_leaf: 2,
            features_per_split: None,
            seed: 0,
            class_weights: ClassWeights::InverseFrequency,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees < 1 {
            return Err(ForestError::InvalidParams("n_trees must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(ForestError::InvalidParams("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(ForestError::InvalidParams(
                "min_samples_leaf must be >= 1".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(ForestError::InvalidParams(
                "features_per_split must be >= 1".into(),
            ));
        }
        self.class_weights
            .validate()
            .map_err(ForestError::InvalidParams)
    }

    pub fn features_per_split_for(&self, dimension: usize) -> usize {
        let k = self
            .features_per_split
            .unwrap_or_else(|| (dimension as f64).sqrt().ceil() as usize);
        k.clamp(1, dimension.max(1))
    }
}

/// A trained forest. Immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    params: ForestParams,
    class_weights: [f64; N_CLASSES],
    dimension: usize,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// Resolved per-class weights used for splits and leaf distributions.
    pub fn class_weights(&self) -> &[f64; N_CLASSES] {
        &self.class_weights
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict(&self, vec: &SparseVector) -> Result<PredictionResult, ForestError> {
        predict_forest(self, vec)
    }

    pub(crate) fn from_parts(
        params: ForestParams,
        class_weights: [f64; N_CLASSES],
        dimension: usize,
        trees: Vec<Tree>,
    ) -> Self {
        ForestModel {
            params,
            class_weights,
            dimension,
            trees,
        }
    }
}

/// Train a forest. Trees are grown in parallel; results do not depend on
/// the thread count.
pub fn train_forest(
    dataset: &[(SparseVector, DocClass)],
    params: &ForestParams,
) -> Result<ForestModel, ForestError> {
    params.validate()?;
    let Some(first) = dataset.first() else {
        return Err(ForestError::EmptyDataset);
    };
    let dimension = first.0.dimension();
    if let Some((v, _)) = dataset.iter().find(|(v, _)| v.dimension() != dimension) {
        return Err(ForestError::DimensionMismatch {
            expected: dimension,
            actual: v.dimension(),
        });
    }
    let class_weights = params.class_weights.resolve(dataset.iter().map(|(_, c)| *c));
    let config = tree::GrowConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        features_per_split: params.features_per_split_for(dimension),
        dimension,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(params.seed, t as u64));
            tree::TreeGrower::new(dataset, &class_weights, &config).grow(&mut rng)
        })
        .collect();
    Ok(ForestModel {
        params: params.clone(),
        class_weights,
        dimension,
        trees,
    })
}

/// Soft vote: mean over trees of each leaf's class-weighted, normalised
/// class counts.
pub fn predict_forest(
    model: &ForestModel,
    vec: &SparseVector,
) -> Result<PredictionResult, ForestError> {
    if vec.dimension() != model.dimension {
        return Err(ForestError::DimensionMismatch {
            expected: model.dimension,
            actual: vec.dimension(),
        });
    }
    let mut probabilities = [0.0; N_CLASSES];
    for tree in &model.trees {
        let counts = tree.leaf_counts(vec);
        let mut leaf = [0.0; N_CLASSES];
        for k in 0..N_CLASSES {
            leaf[k] = counts[k] as f64 * model.class_weights[k];
        }
        let total: f64 = leaf.iter().sum();
        for k in 0..N_CLASSES {
            probabilities[k] += leaf[k] / total;
        }
    }
    let n = model.trees.len() as f64;
    for p in &mut probabilities {
        *p /= n;
    }
    Ok(PredictionResult::from_probabilities(probabilities))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::DocClass::*;

    fn vec1(x: f64) -> SparseVector {
        SparseVector::from_dense(&[x]).unwrap()
    }

    fn leaf_model(trees: Vec<[u32; N_CLASSES]>) -> ForestModel {
        ForestModel::from_parts(
            ForestParams::default(),
            [1.0; N_CLASSES],
            1,
            trees
                .into_iter()
                .map(|c| Tree::from_nodes(vec![Node::Leaf { class_counts: c }]))
                .collect(),
        )
    }

    fn clusters() -> Vec<(SparseVector, DocClass)> {
        let mut data = Vec::new();
        for i in 0..20 {
            data.push((vec1(0.0 + i as f64 * 0.001), BroadSynthesis));
            data.push((vec1(1.0 + i as f64 * 0.001), SystematicReview));
        }
        data
    }

    #[test]
    fn single_leaf_model_predicts_with_certainty() {
        let r = predict_forest(&leaf_model(vec![[0, 7, 0, 0, 0]]), &vec1(3.0)).unwrap();
        assert_eq!(r.probabilities, [0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.predicted, SystematicReview);
        assert_eq!(r.entropy, 0.0);
    }

    #[test]
    fn soft_vote_tie_goes_to_lowest_class() {
        let model = leaf_model(vec![[1, 0, 0, 0, 0], [0, 1, 0, 0, 0]]);
        let r = predict_forest(&model, &vec1(0.0)).unwrap();
        assert_eq!(r.probabilities, [0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(r.predicted, BroadSynthesis);
        assert!((r.entropy - 0.6931).abs() < 1e-4);
    }

    #[test]
    fn one_class_dataset_gives_single_leaf_trees() {
        let data: Vec<_> = (0..10).map(|i| (vec1(i as f64), Excluded)).collect();
        let model = train_forest(&data, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        assert!(model.trees().iter().all(|t| t.nodes().len() == 1));
        let r = model.predict(&vec1(4.0)).unwrap();
        assert_eq!(r.predicted, Excluded);
        assert_eq!(r.confidence(), 1.0);
    }

    #[test]
    fn separable_clusters_are_learned() {
        let data = clusters();
        let params = ForestParams { n_trees: 25, seed: 7, ..Default::default() };
        let model = train_forest(&data, &params).unwrap();
        let correct = data
            .iter()
            .filter(|(v, c)| model.predict(v).unwrap().predicted == *c)
            .count();
        assert_eq!(correct, data.len());
        let at_zero = model.predict(&vec1(0.0)).unwrap();
        assert_eq!(at_zero.predicted, BroadSynthesis);
        assert!(at_zero.probabilities[0] >= 0.9);
    }

    #[test]
    fn training_is_deterministic_and_seed_sensitive() {
        let data = clusters();
        let params = ForestParams { n_trees: 10, seed: 3, ..Default::default() };
        let a = train_forest(&data, &params).unwrap();
        let b = train_forest(&data, &params).unwrap();
        assert_eq!(a, b);
        let c = train_forest(&data, &ForestParams { seed: 4, ..params }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn depth_is_bounded() {
        let data: Vec<_> = (0..64)
            .map(|i| (vec1(i as f64), DocClass::ALL[i % 5]))
            .collect();
        let params = ForestParams {
            n_trees: 5,
            max_depth: 3,
            min_samples_leaf: 1,
            ..Default::default()
        };
        let model = train_forest(&data, &params).unwrap();
        assert!(model.trees().iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            train_forest(&[], &ForestParams::default()),
            Err(ForestError::EmptyDataset)
        ));
        let mixed = vec![(vec1(0.0), Excluded), (SparseVector::zeros(2), Excluded)];
        assert!(matches!(
            train_forest(&mixed, &ForestParams::default()),
            Err(ForestError::DimensionMismatch { .. })
        ));
        let bad = ForestParams { n_trees: 0, ..Default::default() };
        assert!(matches!(
            train_forest(&clusters(), &bad),
            Err(ForestError::InvalidParams(_))
        ));
        let model = leaf_model(vec![[1, 0, 0, 0, 0]]);
        assert!(matches!(
            model.predict(&SparseVector::zeros(3)),
            Err(ForestError::DimensionMismatch { expected: 1, actual: 3 })
        ));
    }

    #[test]
    fn features_per_split_defaults_to_ceil_sqrt() {
        let p = ForestParams::default();
        assert_eq!(p.features_per_split_for(1), 1);
        assert_eq!(p.features_per_split_for(10), 4);
        assert_eq!(p.features_per_split_for(16), 4);
        assert_eq!(p.features_per_split_for(17), 5);
    }
}
