use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::class::{DocClass, N_CLASSES};
use crate::textpipe::SparseVector;

use super::split::{SplitData, SplitSearcher};

/// One tree node. Trees are stored as a preorder arena, so the left child of
/// a split at `i` is always `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        class_counts: [u32; N_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Maximum depth of any leaf; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Class counts of the leaf `vec` falls into.
    #[inline]
    pub fn leaf_counts(&self, vec: &SparseVector) -> &[u32; N_CLASSES] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class_counts } => return class_counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if vec.get(*feature as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

pub(crate) struct GrowConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
    pub dimension: usize,
}

/// Grows one tree over a bootstrap sample. `rows` index into `dataset`;
/// duplicates are expected.
pub(crate) struct TreeGrower<'a> {
    dataset: &'a [(SparseVector, DocClass)],
    class_weights: &'a [f64; N_CLASSES],
    config: &'a GrowConfig,
    searcher: SplitSearcher,
    nodes: Vec<Node>,
}

struct NodeView<'d, 'r> {
    dataset: &'d [(SparseVector, DocClass)],
    class_weights: &'d [f64; N_CLASSES],
    rows: &'r [usize],
}

impl SplitData for NodeView<'_, '_> {
    fn len(&self) -> usize {
        self.rows.len()
    }
    #[inline]
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.dataset[self.rows[row]].0.get(feature)
    }
    #[inline]
    fn class(&self, row: usize) -> usize {
        self.dataset[self.rows[row]].1.index()
    }
    #[inline]
    fn weight(&self, row: usize) -> f64 {
        self.class_weights[self.class(row)]
    }
}

impl<'a> TreeGrower<'a> {
    pub(crate) fn new(
        dataset: &'a [(SparseVector, DocClass)],
        class_weights: &'a [f64; N_CLASSES],
        config: &'a GrowConfig,
    ) -> Self {
        TreeGrower {
            dataset,
            class_weights,
            config,
            searcher: SplitSearcher::default(),
            nodes: Vec::new(),
        }
    }

    pub(crate) fn grow(mut self, rng: &mut ChaCha8Rng) -> Tree {
        let n = self.dataset.len();
        let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        self.grow_node(&mut rows, 0, rng);
        Tree { nodes: self.nodes }
    }

    fn grow_node(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = self.nodes.len() as u32;
        let mut counts = [0u32; N_CLASSES];
        for &r in rows.iter() {
            counts[self.dataset[r].1.index()] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure
            || depth >= self.config.max_depth
            || rows.len() < 2 * self.config.min_samples_leaf
        {
            self.nodes.push(Node::Leaf {
                class_counts: counts,
            });
            return id;
        }

        let mut candidates =
            index::sample(rng, self.config.dimension, self.config.features_per_split).into_vec();
        candidates.sort_unstable();
        let view = NodeView {
            dataset: self.dataset,
            class_weights: self.class_weights,
            rows,
        };
        let Some(split) = self
            .searcher
            .find(&view, &candidates, self.config.min_samples_leaf)
        else {
            self.nodes.push(Node::Leaf {
                class_counts: counts,
            });
            return id;
        };

        let mut boundary = 0;
        for i in 0..rows.len() {
            if self.dataset[rows[i]].0.get(split.feature) <= split.threshold {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        self.nodes.push(Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: id + 1,
            right: 0,
        });
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        self.grow_node(left_rows, depth + 1, rng);
        let right_id = self.grow_node(right_rows, depth + 1, rng);
        if let Node::Split { right, .. } = &mut self.nodes[id as usize] {
            *right = right_id;
        }
        id
    }
}
