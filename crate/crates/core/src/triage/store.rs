use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CurationItem, Decision, ItemStatus, TriageError};

pub const EVENT_LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

/// One entry in the append-only curation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Enqueued {
        seq: u64,
        item: CurationItem,
    },
    Resolved {
        seq: u64,
        item_id: String,
        decision: Decision,
        at: DateTime<Utc>,
    },
}

impl Event {
    pub fn seq(&self) -> u64 {
        match self {
            Event::Enqueued { seq, .. } | Event::Resolved { seq, .. } => *seq,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    last_seq: u64,
    items: Vec<CurationItem>,
}

struct Persistence {
    dir: PathBuf,
    log: File,
    snapshot_every: u64,
    since_snapshot: u64,
}

/// Curation items keyed by document id. State changes go through
/// [`Event`]s; with a backing directory every event is fsynced to the log
/// before the call returns, and the full state is rebuilt on open from the
/// latest snapshot plus the log tail.
pub struct CurationStore {
    items: BTreeMap<String, CurationItem>,
    last_seq: u64,
    resolved: u64,
    persistence: Option<Persistence>,
}

impl Default for CurationStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl CurationStore {
    pub fn in_memory() -> Self {
        CurationStore {
            items: BTreeMap::new(),
            last_seq: 0,
            resolved: 0,
            persistence: None,
        }
    }

    /// Open (or create) a store in `dir`, snapshotting every `snapshot_every`
    /// events (0 disables snapshots).
    pub fn open(dir: impl AsRef<Path>, snapshot_every: u64) -> Result<Self, TriageError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut store = Self::in_memory();

        let snapshot_path = dir.join(SNAPSHOT_FILE);
        if snapshot_path.exists() {
            let snap: Snapshot = serde_json::from_str(&fs::read_to_string(&snapshot_path)?)
                .map_err(|e| TriageError::CorruptLog(format!("snapshot: {e}")))?;
            store.last_seq = snap.last_seq;
            for item in snap.items {
                if !item.is_pending() {
                    store.resolved += 1;
                }
                store.items.insert(item.id().to_string(), item);
            }
        }

        let log_path = dir.join(EVENT_LOG_FILE);
        let mut valid_len = 0u64;
        if log_path.exists() {
            let mut reader = BufReader::new(File::open(&log_path)?);
            let mut line = Vec::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_until(b'\n', &mut line)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with(b"\n") {
                    // Torn final write from a crash.
                    log::warn!("discarding incomplete trailing event at line {lineno}");
                    break;
                }
                let event: Event = serde_json::from_slice(&line)
                    .map_err(|e| TriageError::CorruptLog(format!("line {lineno}: {e}")))?;
                if event.seq() > store.last_seq {
                    store.apply(&event)?;
                }
                valid_len += n as u64;
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        if log.metadata()?.len() > valid_len {
            log.set_len(valid_len)?;
        }
        store.persistence = Some(Persistence {
            dir,
            log,
            snapshot_every,
            since_snapshot: 0,
        });
        Ok(store)
    }

    pub fn get(&self, id: &str) -> Option<&CurationItem> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.items.contains_key(id)
    }

    pub fn items(&self) -> impl Iterator<Item = &CurationItem> {
        self.items.values()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn resolved_count(&self) -> u64 {
        self.resolved
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Validate `event` against the current state and apply it. Does not
    /// write to the log.
    pub fn apply(&mut self, event: &Event) -> Result<(), TriageError> {
        match event {
            Event::Enqueued { item, .. } => {
                if self.items.contains_key(item.id()) {
                    return Err(TriageError::DuplicateItem(item.id().to_string()));
                }
                self.items.insert(item.id().to_string(), item.clone());
            }
            Event::Resolved {
                item_id,
                decision,
                at,
                ..
            } => {
                let item = self
                    .items
                    .get_mut(item_id)
                    .ok_or_else(|| TriageError::UnknownItem(item_id.clone()))?;
                if !item.is_pending() {
                    return Err(TriageError::AlreadyResolved(item_id.clone()));
                }
                let predicted = item.prediction.predicted;
                let (status, label) = match *decision {
                    Decision::Accept => (ItemStatus::Accepted, predicted),
                    Decision::Correct(label) if label == predicted => {
                        return Err(TriageError::CorrectToSameLabel(item_id.clone(), label));
                    }
                    Decision::Correct(label) => (ItemStatus::Corrected, label),
                };
                item.status = status;
                item.final_label = Some(label);
                item.resolved_at = Some(*at);
                self.resolved += 1;
            }
        }
        self.last_seq = self.last_seq.max(event.seq());
        Ok(())
    }

    /// Queue `item`. Fails with [`TriageError::DuplicateItem`] if its id is
    /// already present.
    pub fn enqueue(&mut self, item: CurationItem) -> Result<(), TriageError> {
        if self.items.contains_key(item.id()) {
            return Err(TriageError::DuplicateItem(item.id().to_string()));
        }
        let event = Event::Enqueued {
            seq: self.last_seq + 1,
            item,
        };
        self.commit(event)
    }

    pub fn resolve(
        &mut self,
        id: &str,
        decision: Decision,
        at: DateTime<Utc>,
    ) -> Result<CurationItem, TriageError> {
        let event = Event::Resolved {
            seq: self.last_seq + 1,
            item_id: id.to_string(),
            decision,
            at,
        };
        // Validate on a scratch copy of the one item first so a rejected
        // decision never reaches the log.
        let mut probe = CurationStore::in_memory();
        if let Some(item) = self.items.get(id) {
            probe.items.insert(id.to_string(), item.clone());
        }
        probe.apply(&event)?;
        self.commit(event)?;
        Ok(self.items[id].clone())
    }

    fn commit(&mut self, event: Event) -> Result<(), TriageError> {
        if let Some(p) = &mut self.persistence {
            let mut line = serde_json::to_vec(&event)
                .map_err(|e| TriageError::CorruptLog(e.to_string()))?;
            line.push(b'\n');
            p.log.write_all(&line)?;
            p.log.sync_data()?;
        }
        self.apply(&event)?;
        let due = match &mut self.persistence {
            Some(p) if p.snapshot_every > 0 => {
                p.since_snapshot += 1;
                p.since_snapshot >= p.snapshot_every
            }
            _ => false,
        };
        if due {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Write the full state to the snapshot file (temp file, then rename).
    pub fn snapshot(&mut self) -> Result<(), TriageError> {
        let Some(p) = &mut self.persistence else {
            return Ok(());
        };
        let snap = Snapshot {
            last_seq: self.last_seq,
            items: self.items.values().cloned().collect(),
        };
        let tmp = p.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(&mut f, &snap)
                .map_err(|e| TriageError::CorruptLog(e.to_string()))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, p.dir.join(SNAPSHOT_FILE))?;
        p.since_snapshot = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::DocClass;
    use crate::triage::tests::item;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn at(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
    }

    fn certain(id: &str, class: usize) -> CurationItem {
        let mut p = [0.0; 5];
        p[class] = 1.0;
        item(id, p, 0)
    }

    #[test]
    fn accept_and_correct_set_final_labels() {
        let mut store = CurationStore::in_memory();
        store.enqueue(certain("a", 1)).unwrap();
        store.enqueue(certain("b", 1)).unwrap();
        let a = store.resolve("a", Decision::Accept, at(1)).unwrap();
        assert_eq!(a.status, ItemStatus::Accepted);
        assert_eq!(a.final_label, Some(DocClass::SystematicReview));
        let b = store
            .resolve("b", Decision::Correct(DocClass::Excluded), at(2))
            .unwrap();
        assert_eq!(b.status, ItemStatus::Corrected);
        assert_eq!(b.final_label, Some(DocClass::Excluded));
        assert_eq!(b.resolved_at, Some(at(2)));
        assert!(a.is_consistent() && b.is_consistent());
        assert_eq!(store.resolved_count(), 2);
    }

    #[test]
    fn invalid_transitions_are_rejected() {
        let mut store = CurationStore::in_memory();
        store.enqueue(certain("a", 2)).unwrap();
        assert!(matches!(
            store.enqueue(certain("a", 0)),
            Err(TriageError::DuplicateItem(_))
        ));
        assert!(matches!(
            store.resolve("zz", Decision::Accept, at(0)),
            Err(TriageError::UnknownItem(_))
        ));
        assert!(matches!(
            store.resolve("a", Decision::Correct(DocClass::PrimaryRct), at(0)),
            Err(TriageError::CorrectToSameLabel(..))
        ));
        assert!(store.get("a").unwrap().is_pending());
        store.resolve("a", Decision::Accept, at(0)).unwrap();
        assert!(matches!(
            store.resolve("a", Decision::Accept, at(0)),
            Err(TriageError::AlreadyResolved(_))
        ));
        assert_eq!(store.last_seq(), 2);
    }

    #[test]
    fn rejected_decisions_are_not_logged() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = CurationStore::open(dir.path(), 0).unwrap();
            store.enqueue(certain("a", 2)).unwrap();
            let _ = store.resolve("a", Decision::Correct(DocClass::PrimaryRct), at(0));
            let _ = store.resolve("missing", Decision::Accept, at(0));
        }
        let log = fs::read_to_string(dir.path().join(EVENT_LOG_FILE)).unwrap();
        assert_eq!(log.lines().count(), 1);
    }

    #[test]
    fn torn_trailing_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = CurationStore::open(dir.path(), 0).unwrap();
            store.enqueue(certain("a", 0)).unwrap();
        }
        let path = dir.path().join(EVENT_LOG_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"resolved\",\"seq\":2,\"item_").unwrap();
        drop(f);
        let mut store = CurationStore::open(dir.path(), 0).unwrap();
        assert!(store.get("a").unwrap().is_pending());
        store.resolve("a", Decision::Accept, at(3)).unwrap();
        drop(store);
        let store = CurationStore::open(dir.path(), 0).unwrap();
        assert_eq!(store.get("a").unwrap().status, ItemStatus::Accepted);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(EVENT_LOG_FILE), "not json\n{}\n").unwrap();
        assert!(matches!(
            CurationStore::open(dir.path(), 0),
            Err(TriageError::CorruptLog(_))
        ));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Enqueue(u8, usize),
        Accept(u8),
        Correct(u8, usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u8..12, 0usize..5).prop_map(|(i, c)| Op::Enqueue(i, c)),
            (0u8..12).prop_map(Op::Accept),
            (0u8..12, 0usize..5).prop_map(|(i, c)| Op::Correct(i, c)),
        ]
    }

    fn run(store: &mut CurationStore, ops: &[Op]) {
        for (t, op) in ops.iter().enumerate() {
            let _ = match *op {
                Op::Enqueue(i, c) => store.enqueue(certain(&format!("d{i}"), c)),
                Op::Accept(i) => store
                    .resolve(&format!("d{i}"), Decision::Accept, at(t as i64))
                    .map(drop),
                Op::Correct(i, c) => store
                    .resolve(&format!("d{i}"), Decision::Correct(DocClass::ALL[c]), at(t as i64))
                    .map(drop),
            };
        }
    }

    fn state(store: &CurationStore) -> Vec<CurationItem> {
        store.items().cloned().collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn replay_reproduces_state(ops in proptest::collection::vec(op(), 0..60), every in 0u64..7) {
            let dir = tempfile::tempdir().unwrap();
            let mut live = CurationStore::open(dir.path(), every).unwrap();
            run(&mut live, &ops);
            let expected = state(&live);
            prop_assert!(expected.iter().all(CurationItem::is_consistent));
            let resolved = live.resolved_count();
            let seq = live.last_seq();
            drop(live);

            let replayed = CurationStore::open(dir.path(), every).unwrap();
            prop_assert_eq!(state(&replayed), expected.clone());
            prop_assert_eq!(replayed.resolved_count(), resolved);
            prop_assert_eq!(replayed.last_seq(), seq);

            let mut mem = CurationStore::in_memory();
            run(&mut mem, &ops);
            prop_assert_eq!(state(&mem), expected);
        }
    }
}
