//! Model directory layout shared by the CLI and the server:
//! `vocabulary.json` + `forest.json` for the forest backend and
//! `linear.json` for the linear head.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::forest::{load_forest, save_forest, ForestError};
use crate::linear::{LinearError, LinearModel};
use crate::textpipe::{Featurizer, TextPipeError, Vocabulary};
use crate::triage::ForestBackend;

pub const VOCABULARY_FILE: &str = "vocabulary.json";
pub const FOREST_FILE: &str = "forest.json";
pub const LINEAR_FILE: &str = "linear.json";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("model file {0} not found")]
    Missing(PathBuf),
    #[error("linear head was trained with embedding provider {trained:?}, but {configured:?} is configured")]
    ProviderMismatch { trained: String, configured: String },
    #[error("{0}")]
    Forest(#[from] ForestError),
    #[error("{0}")]
    Linear(#[from] LinearError),
    #[error("{0}")]
    Vocabulary(#[from] TextPipeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn has_forest(dir: &Path) -> bool {
    dir.join(FOREST_FILE).exists() && dir.join(VOCABULARY_FILE).exists()
}

pub fn has_linear(dir: &Path) -> bool {
    dir.join(LINEAR_FILE).exists()
}

pub fn save_forest_bundle(dir: &Path, backend: &ForestBackend) -> Result<(), BundleError> {
    std::fs::create_dir_all(dir)?;
    let vocabulary = backend.featurizer().vocabulary();
    vocabulary.save(dir.join(VOCABULARY_FILE))?;
    save_forest(dir.join(FOREST_FILE), backend.model(), vocabulary)?;
    Ok(())
}

pub fn load_forest_bundle(dir: &Path) -> Result<ForestBackend, BundleError> {
    let vocab_path = require(dir.join(VOCABULARY_FILE))?;
    let forest_path = require(dir.join(FOREST_FILE))?;
    let vocabulary = Vocabulary::load(vocab_path)?;
    let model = load_forest(forest_path, &vocabulary)?;
    Ok(ForestBackend::new(Featurizer::new(vocabulary), model)?)
}

pub fn save_linear_bundle(
    dir: &Path,
    model: &LinearModel,
    provider_identity: &str,
) -> Result<(), BundleError> {
    std::fs::create_dir_all(dir)?;
    model.save(dir.join(LINEAR_FILE), provider_identity)?;
    Ok(())
}

/// Load the linear head, refusing it unless it was trained against the
/// provider identified by `provider_identity`.
pub fn load_linear_bundle(dir: &Path, provider_identity: &str) -> Result<LinearModel, BundleError> {
    let (model, trained) = LinearModel::load(require(dir.join(LINEAR_FILE))?)?;
    if trained != provider_identity {
        return Err(BundleError::ProviderMismatch {
            trained,
            configured: provider_identity.to_string(),
        });
    }
    Ok(model)
}

fn require(path: PathBuf) -> Result<PathBuf, BundleError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(BundleError::Missing(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::DocClass;
    use crate::forest::{train_forest, ForestParams};
    use crate::linear::LinearHyperParams;

    #[test]
    fn forest_bundle_round_trip() {
        let texts = ["alpha beta gamma", "beta gamma delta", "alpha delta"];
        let featurizer = Featurizer::fit(texts, 1, 1.0).unwrap();
        let data: Vec<_> = texts
            .iter()
            .zip([DocClass::PrimaryRct, DocClass::Excluded, DocClass::PrimaryRct])
            .map(|(t, c)| (featurizer.featurize(t), c))
            .collect();
        let model = train_forest(&data, &ForestParams { n_trees: 3, ..Default::default() }).unwrap();
        let backend = ForestBackend::new(featurizer, model).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(!has_forest(dir.path()));
        save_forest_bundle(dir.path(), &backend).unwrap();
        assert!(has_forest(dir.path()));
        let back = load_forest_bundle(dir.path()).unwrap();
        assert_eq!(back.model(), backend.model());
        assert_eq!(
            back.classify("alpha gamma").unwrap(),
            backend.classify("alpha gamma").unwrap()
        );
    }

    #[test]
    fn linear_bundle_checks_provider() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_linear_bundle(dir.path(), "p"),
            Err(BundleError::Missing(_))
        ));
        let model = LinearModel::zeros(4, LinearHyperParams::default());
        save_linear_bundle(dir.path(), &model, "stub:a").unwrap();
        assert_eq!(load_linear_bundle(dir.path(), "stub:a").unwrap(), model);
        assert!(matches!(
            load_linear_bundle(dir.path(), "stub:b"),
            Err(BundleError::ProviderMismatch { .. })
        ));
    }
}
