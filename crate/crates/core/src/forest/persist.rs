//! Versioned JSON model file with a preorder node list per tree.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::class::N_CLASSES;
use crate::textpipe::Vocabulary;

use super::{ForestError, ForestModel, ForestParams, Node, Tree};

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format_version: u32,
    params: ForestParams,
    class_weights: [f64; N_CLASSES],
    dimension: usize,
    vocabulary_hash: String,
    trees: Vec<Vec<FileNode>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FileNode {
    Split { feature: u32, threshold: f64 },
    Leaf([u32; N_CLASSES]),
}

pub fn save_forest(
    path: impl AsRef<Path>,
    model: &ForestModel,
    vocabulary: &Vocabulary,
) -> Result<(), ForestError> {
    if vocabulary.len() != model.dimension {
        return Err(ForestError::DimensionMismatch {
            expected: model.dimension,
            actual: vocabulary.len(),
        });
    }
    let file = ForestFile {
        format_version: FOREST_FORMAT_VERSION,
        params: model.params.clone(),
        class_weights: model.class_weights,
        dimension: model.dimension,
        vocabulary_hash: vocabulary.content_hash(),
        trees: model
            .trees
            .iter()
            .map(|t| {
                t.nodes()
                    .iter()
                    .map(|n| match *n {
                        Node::Split {
                            feature, threshold, ..
                        } => FileNode::Split { feature, threshold },
                        Node::Leaf { class_counts } => FileNode::Leaf(class_counts),
                    })
                    .collect()
            })
            .collect(),
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut out, &file)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Load a forest, refusing it unless it was trained against `vocabulary`.
pub fn load_forest(
    path: impl AsRef<Path>,
    vocabulary: &Vocabulary,
) -> Result<ForestModel, ForestError> {
    let text = fs::read_to_string(path)?;
    let file: ForestFile = serde_json::from_str(&text)?;
    if file.format_version != FOREST_FORMAT_VERSION {
        return Err(ForestError::UnsupportedVersion(file.format_version));
    }
    let found = vocabulary.content_hash();
    if file.vocabulary_hash != found {
        return Err(ForestError::VocabularyMismatch {
            expected: file.vocabulary_hash,
            found,
        });
    }
    file.params.validate()?;
    if file.trees.len() != file.params.n_trees {
        return Err(ForestError::Corrupt(format!(
            "expected {} trees, found {}",
            file.params.n_trees,
            file.trees.len()
        )));
    }
    let trees = file
        .trees
        .iter()
        .map(|nodes| rebuild(nodes, file.dimension, file.params.max_depth))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel::from_parts(
        file.params,
        file.class_weights,
        file.dimension,
        trees,
    ))
}

fn rebuild(preorder: &[FileNode], dimension: usize, max_depth: usize) -> Result<Tree, ForestError> {
    fn walk(
        preorder: &[FileNode],
        cursor: &mut usize,
        out: &mut Vec<Node>,
        depth: usize,
        dimension: usize,
        max_depth: usize,
    ) -> Result<u32, ForestError> {
        if depth > max_depth {
            return Err(ForestError::Corrupt(format!(
                "tree deeper than max_depth {max_depth}"
            )));
        }
        let node = preorder
            .get(*cursor)
            .ok_or_else(|| ForestError::Corrupt("truncated tree".into()))?;
        *cursor += 1;
        let id = out.len() as u32;
        match *node {
            FileNode::Leaf(class_counts) => {
                if class_counts.iter().all(|&c| c == 0) {
                    return Err(ForestError::Corrupt("leaf with no samples".into()));
                }
                out.push(Node::Leaf { class_counts });
            }
            FileNode::Split { feature, threshold } => {
                if feature as usize >= dimension || !threshold.is_finite() {
                    return Err(ForestError::Corrupt(format!(
                        "invalid split on feature {feature} at {threshold}"
                    )));
                }
                out.push(Node::Split {
                    feature,
                    threshold,
                    left: id + 1,
                    right: 0,
                });
                walk(preorder, cursor, out, depth + 1, dimension, max_depth)?;
                let right_id = walk(preorder, cursor, out, depth + 1, dimension, max_depth)?;
                if let Node::Split { right, .. } = &mut out[id as usize] {
                    *right = right_id;
                }
            }
        }
        Ok(id)
    }

    let mut nodes = Vec::with_capacity(preorder.len());
    let mut cursor = 0;
    walk(preorder, &mut cursor, &mut nodes, 0, dimension, max_depth)?;
    if cursor != preorder.len() {
        return Err(ForestError::Corrupt("trailing nodes after tree".into()));
    }
    Ok(Tree::from_nodes(nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::DocClass;
    use crate::forest::train_forest;
    use crate::textpipe::{build_vocabulary, tfidf_transform, vectorize_counts};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn fixture() -> (Vocabulary, ForestModel) {
        let docs = [
            ("aa bb cc", DocClass::PrimaryRct),
            ("aa bb dd", DocClass::PrimaryRct),
            ("ee ff cc", DocClass::Excluded),
            ("ee ff dd", DocClass::Excluded),
            ("gg aa ee", DocClass::SystematicReview),
            ("gg bb ff", DocClass::SystematicReview),
        ];
        let corpus: Vec<_> = docs.iter().map(|(t, _)| toks(t)).collect();
        let vocab = build_vocabulary(&corpus, 1, 1.0).unwrap();
        let data: Vec<_> = corpus
            .iter()
            .zip(docs.iter())
            .map(|(t, (_, c))| {
                (tfidf_transform(&vectorize_counts(t, &vocab), &vocab).unwrap(), *c)
            })
            .collect();
        let params = ForestParams {
            n_trees: 7,
            min_samples_leaf: 1,
            seed: 11,
            ..Default::default()
        };
        let model = train_forest(&data, &params).unwrap();
        (vocab, model)
    }

    #[test]
    fn round_trip_preserves_structure() {
        let (vocab, model) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        save_forest(&path, &model, &vocab).unwrap();
        let back = load_forest(&path, &vocab).unwrap();
        assert_eq!(back, model);
        let path2 = dir.path().join("forest2.json");
        save_forest(&path2, &back, &vocab).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn mismatched_vocabulary_is_rejected() {
        let (vocab, model) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        save_forest(&path, &model, &vocab).unwrap();
        let corpus: Vec<_> = ["aa bb cc dd ee ff gg", "aa"].iter().map(|t| toks(t)).collect();
        let other = build_vocabulary(&corpus, 1, 1.0).unwrap();
        assert_eq!(other.len(), vocab.len());
        assert!(matches!(
            load_forest(&path, &other),
            Err(ForestError::VocabularyMismatch { .. })
        ));
    }

    #[test]
    fn truncated_tree_is_corrupt() {
        let nodes = vec![FileNode::Split {
            feature: 0,
            threshold: 0.5,
        }];
        assert!(matches!(rebuild(&nodes, 1, 4), Err(ForestError::Corrupt(_))));
        let nodes = vec![FileNode::Leaf([1, 0, 0, 0, 0]), FileNode::Leaf([1, 0, 0, 0, 0])];
        assert!(matches!(rebuild(&nodes, 1, 4), Err(ForestError::Corrupt(_))));
        let nodes = vec![
            FileNode::Split { feature: 3, threshold: 0.5 },
            FileNode::Leaf([1, 0, 0, 0, 0]),
            FileNode::Leaf([1, 0, 0, 0, 0]),
        ];
        assert!(matches!(rebuild(&nodes, 2, 4), Err(ForestError::Corrupt(_))));
    }
}
