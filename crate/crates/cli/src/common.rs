use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use ebm_triage::bundle::{load_forest_bundle, load_linear_bundle};
use ebm_triage::embed::{build_provider, EmbeddingProvider};
use ebm_triage::eval::stratified_indices;
use ebm_triage::ingest::{dedup, parse_corpus, DocumentRecord};
use ebm_triage::linear::LinearModel;
use ebm_triage::triage::{Backend, ForestBackend};
use ebm_triage::{DocClass, PredictionResult};

use crate::args::ProviderArgs;
use crate::error::CliError;

pub fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!("{what} {} not found", path.display())))
    }
}

pub fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!("{what} {} not found", path.display())))
    }
}

pub fn check_ratio(test_ratio: f64) -> Result<(), CliError> {
    if (0.0..1.0).contains(&test_ratio) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--test-ratio must be in [0, 1), got {test_ratio}"
        )))
    }
}

/// Read a corpus, report bad lines on stderr, drop duplicate ids.
pub fn load_corpus(path: &Path) -> Result<Vec<DocumentRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let parsed = parse_corpus(BufReader::new(file)).map_err(|e| CliError::io(path, e))?;
    for e in &parsed.errors {
        log::warn!("{}: {e}", path.display());
    }
    if !parsed.errors.is_empty() {
        eprintln!(
            "{}: skipped {} invalid line(s)",
            path.display(),
            parsed.errors.len()
        );
    }
    let (records, dropped) = dedup(parsed.records);
    if dropped > 0 {
        eprintln!("{}: dropped {dropped} duplicate id(s)", path.display());
    }
    Ok(records)
}

/// Labelled records only; fails if there are none.
pub fn load_labelled(path: &Path) -> Result<Vec<(DocumentRecord, DocClass)>, CliError> {
    let records = load_corpus(path)?;
    let total = records.len();
    let labelled: Vec<_> = records
        .into_iter()
        .filter_map(|r| r.label.map(|l| (r, l)))
        .collect();
    if labelled.is_empty() {
        return Err(CliError::Mismatch(format!(
            "{}: no labelled documents",
            path.display()
        )));
    }
    if labelled.len() < total {
        eprintln!(
            "{}: ignoring {} unlabelled document(s)",
            path.display(),
            total - labelled.len()
        );
    }
    Ok(labelled)
}

/// Deterministic stratified (train, test) partition; a zero ratio puts
/// everything in train.
pub fn split<T: Clone>(
    data: &[(T, DocClass)],
    test_ratio: f64,
    seed: u64,
) -> Result<(Vec<(T, DocClass)>, Vec<(T, DocClass)>), CliError> {
    if test_ratio == 0.0 {
        return Ok((data.to_vec(), Vec::new()));
    }
    let (train, test) = stratified_indices(data.iter().map(|(_, c)| *c), test_ratio, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect();
    Ok((pick(&train), pick(&test)))
}

/// A loaded backend that classifies batches of texts in order.
pub enum Predictor {
    Forest(ForestBackend),
    Linear {
        model: LinearModel,
        provider: Arc<dyn EmbeddingProvider>,
    },
}

impl Predictor {
    pub fn load(dir: &Path, backend: Backend, provider: &ProviderArgs) -> Result<Self, CliError> {
        require_dir(dir, "model directory")?;
        Ok(match backend {
            Backend::Forest => Predictor::Forest(load_forest_bundle(dir)?),
            Backend::Linear => {
                let provider = build_provider(&provider.config())?;
                let model = load_linear_bundle(dir, &provider.identity())?;
                if model.dimension() != provider.dimension() {
                    return Err(CliError::Mismatch(format!(
                        "linear head expects {}-d embeddings, provider gives {}",
                        model.dimension(),
                        provider.dimension()
                    )));
                }
                Predictor::Linear { model, provider }
            }
        })
    }

    pub fn predict_batch(&self, texts: &[String]) -> Result<Vec<PredictionResult>, CliError> {
        match self {
            Predictor::Forest(forest) => texts
                .par_iter()
                .map(|t| forest.classify(t).map_err(CliError::from))
                .collect(),
            Predictor::Linear { model, provider } => provider
                .embed_batch(texts)?
                .iter()
                .map(|e| model.predict(e).map_err(CliError::from))
                .collect(),
        }
    }
}
