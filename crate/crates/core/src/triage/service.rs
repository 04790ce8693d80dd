use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::Utc;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::class::{DocClass, N_CLASSES};
use crate::embed::EmbeddingProvider;
use crate::forest::{ForestError, ForestModel};
use crate::ingest::{classification_text, DocumentRecord};
use crate::linear::{train_linear, LinearError, LinearHyperParams, LinearModel};
use crate::prediction::PredictionResult;
use crate::textpipe::Featurizer;

use super::{
    enqueue_and_order, Backend, CurationItem, CurationStore, Decision, TriageError, TriageStats,
};

/// A forest together with the featurizer whose vocabulary it was trained on.
#[derive(Debug, Clone)]
pub struct ForestBackend {
    featurizer: Featurizer,
    model: ForestModel,
}

impl ForestBackend {
    pub fn new(featurizer: Featurizer, model: ForestModel) -> Result<Self, ForestError> {
        if featurizer.vocabulary().len() != model.dimension() {
            return Err(ForestError::DimensionMismatch {
                expected: model.dimension(),
                actual: featurizer.vocabulary().len(),
            });
        }
        Ok(ForestBackend { featurizer, model })
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    pub fn model(&self) -> &ForestModel {
        &self.model
    }

    pub fn classify(&self, text: &str) -> Result<PredictionResult, ForestError> {
        self.model.predict(&self.featurizer.featurize(text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Resolved items needed since the last retrain before
    /// [`TriageService::maybe_retrain`] retrains.
    pub min_new_labels: usize,
    pub linear_hyperparams: LinearHyperParams,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            min_new_labels: 25,
            linear_hyperparams: LinearHyperParams::default(),
        }
    }
}

/// Serving model versions; `None` when no model of that backend is loaded.
/// Versions start at 1 and increase on every swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub forest: Option<u64>,
    pub linear: Option<u64>,
}

struct Slot<T> {
    model: Option<Arc<T>>,
    version: u64,
}

impl<T> Slot<T> {
    fn empty() -> Self {
        Slot {
            model: None,
            version: 0,
        }
    }

    fn current(&self) -> Option<(Arc<T>, u64)> {
        self.model.as_ref().map(|m| (Arc::clone(m), self.version))
    }

    fn replace(&mut self, model: Arc<T>) -> u64 {
        self.version += 1;
        self.model = Some(model);
        self.version
    }

    fn loaded_version(&self) -> Option<u64> {
        self.model.as_ref().map(|_| self.version)
    }
}

#[derive(Default)]
struct Counters {
    classified: u64,
    per_class: [u64; N_CLASSES],
}

/// The triage service: classification, the curation queue, feedback and
/// retraining. All methods take `&self` and are safe to call concurrently.
///
/// Each classification clones the current model `Arc` once and uses it for
/// the whole call, so a concurrent swap is never observed half-way.
pub struct TriageService {
    forest: RwLock<Slot<ForestBackend>>,
    linear: RwLock<Slot<LinearModel>>,
    provider: Arc<dyn EmbeddingProvider>,
    training_corpus: RwLock<Vec<DocumentRecord>>,
    store: Mutex<CurationStore>,
    counters: Mutex<Counters>,
    retrain_lock: Mutex<()>,
    resolved_at_last_retrain: AtomicU64,
    config: ServiceConfig,
}

impl TriageService {
    pub fn new(
        provider: Arc<dyn EmbeddingProvider>,
        store: CurationStore,
        config: ServiceConfig,
    ) -> Self {
        let resolved = store.resolved_count();
        TriageService {
            forest: RwLock::new(Slot::empty()),
            linear: RwLock::new(Slot::empty()),
            provider,
            training_corpus: RwLock::new(Vec::new()),
            store: Mutex::new(store),
            counters: Mutex::new(Counters::default()),
            retrain_lock: Mutex::new(()),
            resolved_at_last_retrain: AtomicU64::new(resolved),
            config,
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn provider(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.provider
    }

    /// Install a forest; returns its version.
    pub fn set_forest(&self, backend: ForestBackend) -> u64 {
        self.forest.write().replace(Arc::new(backend))
    }

    /// Install a linear head; returns its version.
    pub fn set_linear(&self, model: LinearModel) -> Result<u64, TriageError> {
        let expected = self.provider.dimension();
        if model.dimension() != expected {
            return Err(LinearError::DimensionMismatch {
                expected,
                actual: model.dimension(),
            }
            .into());
        }
        Ok(self.linear.write().replace(Arc::new(model)))
    }

    pub fn forest(&self) -> Option<Arc<ForestBackend>> {
        self.forest.read().current().map(|(m, _)| m)
    }

    pub fn linear(&self) -> Option<Arc<LinearModel>> {
        self.linear.read().current().map(|(m, _)| m)
    }

    pub fn model_versions(&self) -> ModelVersions {
        ModelVersions {
            forest: self.forest.read().loaded_version(),
            linear: self.linear.read().loaded_version(),
        }
    }

    /// Labelled documents the linear head is retrained on, alongside
    /// resolved feedback. Unlabelled records are dropped.
    pub fn set_training_corpus(&self, records: Vec<DocumentRecord>) {
        *self.training_corpus.write() = records.into_iter().filter(|r| r.label.is_some()).collect();
    }

    pub fn classify(
        &self,
        title: &str,
        abstract_text: &str,
        backend: Backend,
    ) -> Result<PredictionResult, TriageError> {
        let text = classification_text(title, abstract_text);
        Ok(self.classify_texts(&[text], backend)?.0.remove(0))
    }

    /// Classify `texts` with one model snapshot. Also returns the version of
    /// the model that produced the results.
    pub fn classify_texts(
        &self,
        texts: &[String],
        backend: Backend,
    ) -> Result<(Vec<PredictionResult>, u64), TriageError> {
        let (results, version) = match backend {
            Backend::Forest => {
                let (model, version) = self
                    .forest
                    .read()
                    .current()
                    .ok_or(TriageError::NoModelLoaded(backend))?;
                let results = texts
                    .iter()
                    .map(|t| model.classify(t))
                    .collect::<Result<Vec<_>, _>>()?;
                (results, version)
            }
            Backend::Linear => {
                let (model, version) = self
                    .linear
                    .read()
                    .current()
                    .ok_or(TriageError::NoModelLoaded(backend))?;
                let embeddings = self.provider.embed_batch(texts)?;
                let results = embeddings
                    .iter()
                    .map(|e| model.predict(e))
                    .collect::<Result<Vec<_>, _>>()?;
                (results, version)
            }
        };
        let mut counters = self.counters.lock();
        for r in &results {
            counters.classified += 1;
            counters.per_class[r.predicted.index()] += 1;
        }
        Ok((results, version))
    }

    /// Classify and queue `records`. Records whose id is already queued are
    /// skipped; returns the ids actually enqueued, in input order.
    pub fn enqueue(
        &self,
        records: Vec<DocumentRecord>,
        backend: Backend,
    ) -> Result<Vec<String>, TriageError> {
        let fresh: Vec<DocumentRecord> = {
            let store = self.store.lock();
            let mut seen = std::collections::HashSet::new();
            records
                .into_iter()
                .filter(|r| !store.contains(&r.id) && seen.insert(r.id.clone()))
                .collect()
        };
        if fresh.is_empty() {
            return Ok(Vec::new());
        }
        let texts: Vec<String> = fresh.iter().map(DocumentRecord::text).collect();
        let (predictions, _) = self.classify_texts(&texts, backend)?;
        let now = Utc::now();
        let mut store = self.store.lock();
        let mut enqueued = Vec::with_capacity(fresh.len());
        for (record, prediction) in fresh.into_iter().zip(predictions) {
            let id = record.id.clone();
            match store.enqueue(CurationItem::pending(record, prediction, backend, now)) {
                Ok(()) => enqueued.push(id),
                // Raced with a concurrent enqueue of the same id.
                Err(TriageError::DuplicateItem(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(enqueued)
    }

    /// Up to `limit` pending items in review order.
    pub fn queue(&self, limit: usize) -> Vec<CurationItem> {
        let store = self.store.lock();
        let mut queue = enqueue_and_order(store.items());
        queue.truncate(limit);
        queue
    }

    pub fn item(&self, id: &str) -> Option<CurationItem> {
        self.store.lock().get(id).cloned()
    }

    /// Resolve a pending item. The decision is durably logged before this
    /// returns.
    pub fn record_feedback(&self, id: &str, decision: Decision) -> Result<CurationItem, TriageError> {
        self.store.lock().resolve(id, decision, Utc::now())
    }

    pub fn resolved_since_retrain(&self) -> u64 {
        let total = self.store.lock().resolved_count();
        total.saturating_sub(self.resolved_at_last_retrain.load(Ordering::SeqCst))
    }

    /// Retrain with the configured threshold.
    pub fn maybe_retrain(&self) -> Result<Option<Arc<LinearModel>>, TriageError> {
        self.retrain_from_feedback(self.config.min_new_labels)
    }

    /// Retrain the linear head from scratch on the training corpus plus every
    /// resolved item, if at least `min_new_labels` items were resolved since
    /// the last retrain. On success the new head replaces the serving one;
    /// on failure the serving head is untouched.
    pub fn retrain_from_feedback(
        &self,
        min_new_labels: usize,
    ) -> Result<Option<Arc<LinearModel>>, TriageError> {
        let _guard = self.retrain_lock.lock();
        let (resolved_total, feedback) = {
            let store = self.store.lock();
            let feedback: Vec<(DocumentRecord, DocClass)> = store
                .items()
                .filter_map(|i| i.final_label.map(|l| (i.record.clone(), l)))
                .collect();
            (store.resolved_count(), feedback)
        };
        let since = resolved_total.saturating_sub(self.resolved_at_last_retrain.load(Ordering::SeqCst));
        if since < min_new_labels as u64 {
            return Ok(None);
        }

        // Physician labels override the corpus label of the same document.
        let mut labels: Vec<(String, DocClass)> = Vec::new();
        let mut position: HashMap<String, usize> = HashMap::new();
        let corpus = self.training_corpus.read().clone();
        for (record, label) in corpus
            .iter()
            .filter_map(|r| r.label.map(|l| (r, l)))
            .chain(feedback.iter().map(|(r, l)| (r, *l)))
        {
            match position.get(&record.id) {
                Some(&i) => labels[i].1 = label,
                None => {
                    position.insert(record.id.clone(), labels.len());
                    labels.push((record.text(), label));
                }
            }
        }
        if labels.is_empty() {
            return Err(TriageError::NoTrainingData);
        }

        let texts: Vec<String> = labels.iter().map(|(t, _)| t.clone()).collect();
        let embeddings = self.provider.embed_batch(&texts)?;
        let dataset: Vec<_> = embeddings
            .into_iter()
            .zip(labels.iter().map(|(_, l)| *l))
            .collect();
        let model = Arc::new(train_linear(&dataset, &self.config.linear_hyperparams)?);
        let version = self.linear.write().replace(Arc::clone(&model));
        self.resolved_at_last_retrain
            .store(resolved_total, Ordering::SeqCst);
        log::info!(
            "retrained linear head v{version} on {} documents ({since} new labels)",
            dataset.len()
        );
        Ok(Some(model))
    }

    pub fn stats(&self) -> TriageStats {
        let resolved = self.store.lock().resolved_count();
        let c = self.counters.lock();
        TriageStats::new(c.classified, resolved, c.per_class)
    }
}
