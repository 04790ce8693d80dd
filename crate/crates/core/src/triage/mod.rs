//! Curation queue for physician review.
//!
//! Incoming documents are classified and queued; pending items are served
//! most-uncertain first. Physician decisions are appended to a durable event
//! log ([`CurationStore`]) and periodically feed a full retrain of the linear
//! head, which is swapped in atomically ([`TriageService`]).

mod service;
mod store;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::DocClass;
use crate::embed::EmbedError;
use crate::forest::ForestError;
use crate::ingest::DocumentRecord;
use crate::linear::LinearError;
use crate::prediction::PredictionResult;

pub use service::{ForestBackend, ModelVersions, ServiceConfig, TriageService};
pub use store::{CurationStore, Event, EVENT_LOG_FILE, SNAPSHOT_FILE};

/// Physician minutes spent reviewing one article by hand.
pub const MINUTES_PER_ARTICLE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Forest,
    Linear,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Forest => "forest",
            Backend::Linear => "linear",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "forest" => Ok(Backend::Forest),
            "linear" => Ok(Backend::Linear),
            other => Err(format!("unknown backend {other:?} (expected forest or linear)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemStatus {
    Pending,
    Accepted,
    Corrected,
}

/// A physician's verdict on a queued item. Serialises as `"accept"` or
/// `{"correct": "<label>"}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Correct(DocClass),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationItem {
    pub record: DocumentRecord,
    pub prediction: PredictionResult,
    pub backend: Backend,
    pub status: ItemStatus,
    pub final_label: Option<DocClass>,
    pub created_at: DateTime<Utc>,
    pub resolved_at: Option<DateTime<Utc>>,
}

impl CurationItem {
    pub fn pending(
        record: DocumentRecord,
        prediction: PredictionResult,
        backend: Backend,
        created_at: DateTime<Utc>,
    ) -> Self {
        CurationItem {
            record,
            prediction,
            backend,
            status: ItemStatus::Pending,
            final_label: None,
            created_at,
            resolved_at: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn is_pending(&self) -> bool {
        self.status == ItemStatus::Pending
    }

    /// Checks the status / final-label consistency rules.
    pub fn is_consistent(&self) -> bool {
        match self.status {
            ItemStatus::Pending => self.final_label.is_none() && self.resolved_at.is_none(),
            ItemStatus::Accepted => self.final_label == Some(self.prediction.predicted),
            ItemStatus::Corrected => self
                .final_label
                .is_some_and(|l| l != self.prediction.predicted),
        }
    }
}

/// Queue order: entropy descending, then older `created_at`, then id.
pub fn queue_order(a: &CurationItem, b: &CurationItem) -> Ordering {
    b.prediction
        .entropy
        .total_cmp(&a.prediction.entropy)
        .then_with(|| a.created_at.cmp(&b.created_at))
        .then_with(|| a.id().cmp(b.id()))
}

/// Pending items in review order; resolved items are dropped.
pub fn enqueue_and_order<'a>(
    items: impl IntoIterator<Item = &'a CurationItem>,
) -> Vec<CurationItem> {
    let mut pending: Vec<CurationItem> = items
        .into_iter()
        .filter(|i| i.is_pending())
        .cloned()
        .collect();
    pending.sort_by(queue_order);
    pending
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageStats {
    pub documents_classified: u64,
    pub items_resolved: u64,
    pub per_class_predictions: BTreeMap<DocClass, u64>,
    pub estimated_minutes_saved: f64,
}

impl TriageStats {
    pub fn new(documents_classified: u64, items_resolved: u64, per_class: [u64; 5]) -> Self {
        TriageStats {
            documents_classified,
            items_resolved,
            per_class_predictions: DocClass::ALL.into_iter().zip(per_class).collect(),
            estimated_minutes_saved: MINUTES_PER_ARTICLE * documents_classified as f64,
        }
    }
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("no {} model is loaded", .0.as_str())]
    NoModelLoaded(Backend),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} is already resolved")]
    AlreadyResolved(String),
    #[error("a correction must change the label (item {0:?} is already predicted {1})")]
    CorrectToSameLabel(String, DocClass),
    #[error("item {0:?} is already queued")]
    DuplicateItem(String),
    #[error("embedding provider: {0}")]
    Embed(#[from] EmbedError),
    #[error("forest: {0}")]
    Forest(#[from] ForestError),
    #[error("linear head: {0}")]
    Linear(#[from] LinearError),
    #[error("nothing to train on: no labelled documents or resolved items")]
    NoTrainingData,
    #[error("feedback log: {0}")]
    Log(#[from] std::io::Error),
    #[error("corrupt feedback log: {0}")]
    CorruptLog(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Source;
    use chrono::TimeZone;

    pub(crate) fn item(id: &str, probs: [f64; 5], secs: i64) -> CurationItem {
        CurationItem::pending(
            DocumentRecord {
                id: id.into(),
                title: format!("title {id}"),
                abstract_text: String::new(),
                source: Source::Other,
                label: None,
            },
            PredictionResult::from_probabilities(probs),
            Backend::Linear,
            Utc.timestamp_opt(1_600_000_000 + secs, 0).unwrap(),
        )
    }

    fn with_entropy(id: &str, target: f64, secs: i64) -> CurationItem {
        let mut it = item(id, [0.2; 5], secs);
        it.prediction.entropy = target;
        it
    }

    #[test]
    fn orders_by_descending_entropy() {
        let items = [with_entropy("a", 0.1, 0), with_entropy("b", 1.2, 0), with_entropy("c", 0.7, 0)];
        let order: Vec<f64> = enqueue_and_order(&items).iter().map(|i| i.prediction.entropy).collect();
        assert_eq!(order, vec![1.2, 0.7, 0.1]);
    }

    #[test]
    fn uniform_prediction_sorts_first() {
        let items = [
            item("a", [0.5, 0.5, 0.0, 0.0, 0.0], 0),
            item("b", [0.3, 0.3, 0.2, 0.1, 0.1], 0),
            item("u", [0.2; 5], 5),
        ];
        let q = enqueue_and_order(&items);
        assert_eq!(q[0].id(), "u");
        assert!((q[0].prediction.entropy - 1.6094).abs() < 1e-4);
    }

    #[test]
    fn ties_break_on_age_then_id() {
        let items = [with_entropy("z", 0.5, 10), with_entropy("y", 0.5, 5), with_entropy("x", 0.5, 10)];
        let ids: Vec<_> = enqueue_and_order(&items).iter().map(|i| i.id().to_string()).collect();
        assert_eq!(ids, ["y", "x", "z"]);
    }

    #[test]
    fn resolved_items_are_excluded() {
        let mut done = item("done", [0.2; 5], 0);
        done.status = ItemStatus::Accepted;
        done.final_label = Some(done.prediction.predicted);
        let items = [done, item("open", [1.0, 0.0, 0.0, 0.0, 0.0], 0)];
        let q = enqueue_and_order(&items);
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].id(), "open");
    }

    #[test]
    fn decision_wire_format() {
        assert_eq!(serde_json::to_string(&Decision::Accept).unwrap(), "\"accept\"");
        assert_eq!(
            serde_json::to_string(&Decision::Correct(DocClass::Excluded)).unwrap(),
            "{\"correct\":\"excluded\"}"
        );
        let d: Decision = serde_json::from_str("{\"correct\":\"Primary RCT\"}").unwrap();
        assert_eq!(d, Decision::Correct(DocClass::PrimaryRct));
    }

    #[test]
    fn stats_minutes_saved() {
        assert_eq!(TriageStats::new(0, 0, [0; 5]).estimated_minutes_saved, 0.0);
        assert_eq!(TriageStats::new(60, 0, [0; 5]).estimated_minutes_saved, 120.0);
        let big = TriageStats::new(32_000, 0, [0; 5]);
        assert_eq!(big.estimated_minutes_saved, 64_000.0);
        assert!((big.estimated_minutes_saved / 60.0 - 1066.67).abs() < 0.01);
    }

    proptest::proptest! {
        #[test]
        fn queue_order_is_total(
            entries in proptest::collection::vec((0u8..3, 0i64..3, "[a-c]{1,2}"), 2..20)
        ) {
            let items: Vec<_> = entries
                .iter()
                .map(|(e, t, id)| with_entropy(id, *e as f64 * 0.5, *t))
                .collect();
            for a in &items {
                for b in &items {
                    let ord = queue_order(a, b);
                    proptest::prop_assert_eq!(ord, queue_order(b, a).reverse());
                    if ord == Ordering::Equal {
                        proptest::prop_assert_eq!(a.id(), b.id());
                    }
                }
            }
        }
    }
}
