use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{AnnotationConfig, AnnotationRecord, RecordState, Role};
use crate::corpus::{LabeledCorpus, Post};
use crate::error::{Error, Result};

/// One accepted score submission, as written to the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub post_id: String,
    pub role: Role,
    pub score: i64,
    pub seq: u64,
}

struct State {
    records: Vec<AnnotationRecord>,
    events: Vec<ScoreEvent>,
    log: Option<File>,
}

/// Append-only event store. Record state is derived by replaying accepted
/// score events; with a log path every event is synced to disk before
/// `submit_score` returns.
///
/// Writes hold a single lock, so submissions for any one post are linearized
/// and readers always see a state produced by a whole number of events.
pub struct AnnotationStore {
    config: AnnotationConfig,
    posts: Vec<Post>,
    index: HashMap<String, usize>,
    log_path: Option<PathBuf>,
    state: RwLock<State>,
}

impl AnnotationStore {
    /// In-memory store over `posts`, in ingestion order.
    pub fn new(posts: Vec<Post>, config: AnnotationConfig) -> Result<Self> {
        let mut index = HashMap::with_capacity(posts.len());
        for (i, p) in posts.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate id: {}", p.id)));
            }
        }
        let records = posts.iter().map(|p| AnnotationRecord::new(&p.id)).collect();
        Ok(AnnotationStore {
            config,
            posts,
            index,
            log_path: None,
            state: RwLock::new(State {
                records,
                events: Vec::new(),
                log: None,
            }),
        })
    }

    /// Store backed by the event log at `log_path`. An existing log is
    /// replayed first; any event that does not apply cleanly aborts the open.
    pub fn open(posts: Vec<Post>, config: AnnotationConfig, log_path: &Path) -> Result<Self> {
        let mut store = Self::new(posts, config)?;
        if log_path.exists() {
            let file = Error::open(log_path)?;
            store.replay(BufReader::new(file))?;
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .map_err(|e| Error::io(log_path.display().to_string(), e))?;
        store.state.get_mut().expect("fresh lock").log = Some(log);
        store.log_path = Some(log_path.to_path_buf());
        Ok(store)
    }

    fn replay<R: BufRead>(&mut self, reader: R) -> Result<()> {
        let state = self.state.get_mut().expect("fresh lock");
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(format!("event log line {line_no}"), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| Error::CorruptLog {
                line: line_no,
                message,
            };
            let event: ScoreEvent =
                serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            let expected = state.events.last().map_or(1, |e| e.seq + 1);
            if event.seq != expected {
                return Err(corrupt(format!("seq {} but expected {expected}", event.seq)));
            }
            let idx = *self
                .index
                .get(&event.post_id)
                .ok_or_else(|| corrupt(format!("seq {}: unknown post {}", event.seq, event.post_id)))?;
            state.records[idx]
                .apply(event.role, event.score, &self.config)
                .map_err(|e| corrupt(format!("seq {}: {e}", event.seq)))?;
            state.events.push(event);
        }
        Ok(())
    }

    pub fn config(&self) -> &AnnotationConfig {
        &self.config
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log_path.as_deref()
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn post(&self, post_id: &str) -> Option<&Post> {
        self.index.get(post_id).map(|&i| &self.posts[i])
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn submit_score(&self, post_id: &str, annotator: impl Into<Role>, score: i64) -> Result<AnnotationRecord> {
        let role = annotator.into();
        let idx = *self
            .index
            .get(post_id)
            .ok_or_else(|| Error::UnknownPost(post_id.to_string()))?;
        let mut state = self.state.write().expect("store lock poisoned");
        let mut updated = state.records[idx].clone();
        updated.apply(role, score, &self.config)?;
        let event = ScoreEvent {
            post_id: post_id.to_string(),
            role,
            score,
            seq: state.events.last().map_or(1, |e| e.seq + 1),
        };
        if let Some(log) = state.log.as_mut() {
            let mut line = serde_json::to_string(&event).expect("event serializes");
            line.push('\n');
            log.write_all(line.as_bytes())
                .and_then(|_| log.sync_data())
                .map_err(|e| Error::io("append event log", e))?;
        }
        state.records[idx] = updated.clone();
        state.events.push(event);
        Ok(updated)
    }

    pub fn record(&self, post_id: &str) -> Result<AnnotationRecord> {
        let idx = *self
            .index
            .get(post_id)
            .ok_or_else(|| Error::UnknownPost(post_id.to_string()))?;
        Ok(self.state.read().expect("store lock poisoned").records[idx].clone())
    }

    /// Snapshot of every record, in ingestion order.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.state.read().expect("store lock poisoned").records.clone()
    }

    pub fn events(&self) -> Vec<ScoreEvent> {
        self.state.read().expect("store lock poisoned").events.clone()
    }

    /// Posts `role` may score right now, in ingestion order.
    pub fn pending_queue(&self, annotator: impl Into<Role>) -> Vec<String> {
        let role = annotator.into();
        let state = self.state.read().expect("store lock poisoned");
        state
            .records
            .iter()
            .filter(|r| r.awaits(role))
            .map(|r| r.post_id.clone())
            .collect()
    }

    /// The resolved posts with their final labels, in ingestion order.
    pub fn export_labels(&self) -> LabeledCorpus {
        let state = self.state.read().expect("store lock poisoned");
        let mut posts = Vec::new();
        let mut labels = Vec::new();
        for (post, rec) in self.posts.iter().zip(&state.records) {
            if rec.state == RecordState::Resolved {
                posts.push(post.clone());
                labels.push(rec.final_label.expect("resolved records carry a label"));
            }
        }
        LabeledCorpus::new(posts, labels).expect("equal lengths")
    }

    pub fn count_by_state(&self, state: RecordState) -> usize {
        self.state
            .read()
            .expect("store lock poisoned")
            .records
            .iter()
            .filter(|r| r.state == state)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::ResolvedBy;

    fn posts(n: usize) -> Vec<Post> {
        (0..n).map(|i| Post::new(format!("p{i}"), format!("text {i}"))).collect()
    }

    #[test]
    fn fresh_queue_lists_every_post() {
        let store = AnnotationStore::new(posts(3), AnnotationConfig::default()).unwrap();
        assert_eq!(store.pending_queue(Role::Primary1), vec!["p0", "p1", "p2"]);
        assert!(store.pending_queue(Role::ThirdReviewer).is_empty());
    }

    #[test]
    fn queue_shrinks_after_scoring() {
        let store = AnnotationStore::new(posts(3), AnnotationConfig::default()).unwrap();
        store.submit_score("p0", Role::Primary1, 4).unwrap();
        assert_eq!(store.pending_queue(Role::Primary1), vec!["p1", "p2"]);
        assert_eq!(store.pending_queue(Role::Primary2), vec!["p0", "p1", "p2"]);
    }

    #[test]
    fn disputed_record_reaches_third_reviewer() {
        let store = AnnotationStore::new(posts(3), AnnotationConfig::default()).unwrap();
        store.submit_score("p1", Role::Primary1, 8).unwrap();
        store.submit_score("p1", Role::Primary2, 2).unwrap();
        assert_eq!(store.pending_queue(Role::ThirdReviewer), vec!["p1"]);
        let rec = store.submit_score("p1", &crate::annotation::AnnotatorId::new("carol", Role::ThirdReviewer), 1).unwrap();
        assert_eq!(rec.resolved_by, ResolvedBy::ThirdReviewer);
        assert_eq!(rec.final_label, Some(false));
        assert!(store.pending_queue(Role::ThirdReviewer).is_empty());
    }

    #[test]
    fn export_contains_only_resolved() {
        let store = AnnotationStore::new(posts(3), AnnotationConfig::default()).unwrap();
        assert!(store.export_labels().is_empty());
        for (id, a, b) in [("p0", 9, 9), ("p1", 1, 2), ("p2", 9, 1)] {
            store.submit_score(id, Role::Primary1, a).unwrap();
            store.submit_score(id, Role::Primary2, b).unwrap();
        }
        let exported = store.export_labels();
        assert_eq!(exported.len(), 2);
        assert_eq!(exported.labels, vec![true, false]);
        store.submit_score("p2", Role::ThirdReviewer, 7).unwrap();
        assert_eq!(store.export_labels().len(), store.len());
    }

    #[test]
    fn unknown_post_is_rejected() {
        let store = AnnotationStore::new(posts(1), AnnotationConfig::default()).unwrap();
        assert!(matches!(store.submit_score("nope", Role::Primary1, 3), Err(Error::UnknownPost(_))));
        assert!(store.events().is_empty());
    }

    #[test]
    fn log_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let store = AnnotationStore::open(posts(3), AnnotationConfig::default(), &path).unwrap();
            store.submit_score("p0", Role::Primary1, 9).unwrap();
            store.submit_score("p0", Role::Primary2, 1).unwrap();
            store.submit_score("p2", Role::Primary2, 5).unwrap();
            assert!(store.submit_score("p2", Role::Primary2, 5).is_err());
        }
        let before = {
            let store = AnnotationStore::open(posts(3), AnnotationConfig::default(), &path).unwrap();
            assert_eq!(store.events().len(), 3);
            store.records()
        };
        assert_eq!(before[0].state, RecordState::Disputed);
        assert_eq!(before[2].state, RecordState::PendingSecond);

        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"post_id\":\"p2\",\"role\":\"Primary2\",\"score\":3,\"seq\":4}\n");
        std::fs::write(&path, text).unwrap();
        let err = AnnotationStore::open(posts(3), AnnotationConfig::default(), &path).err().unwrap();
        match err {
            Error::CorruptLog { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("seq 4"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
