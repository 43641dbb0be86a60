use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Annotation, Status};
use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("question {question_id} already annotated by {annotator}")]
    Duplicate { question_id: u64, annotator: String },
    #[error(transparent)]
    Storage(#[from] Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Created,
    Replaced,
}

/// Append-only JSON-lines log of annotations, last write wins per
/// (question, annotator). The log is replayed on open.
#[derive(Debug)]
pub struct AnnotationStore {
    path: Option<PathBuf>,
    file: Option<File>,
    records: BTreeMap<(u64, String), Annotation>,
    appended: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

impl AnnotationStore {
    pub fn in_memory() -> Self {
        AnnotationStore {
            path: None,
            file: None,
            records: BTreeMap::new(),
            appended: 0,
        }
    }

    /// Opens or creates the log at `path` and replays it.
    ///
    /// A malformed final line (an interrupted append) is ignored with a
    /// warning; a malformed line elsewhere is an error.
    pub fn open(path: &Path) -> Result<Self, Error> {
        let mut records = BTreeMap::new();
        let mut appended = 0;
        let content = if path.exists() {
            std::fs::read_to_string(path).map_err(io_err(path))?
        } else {
            String::new()
        };
        // byte length of the well-formed prefix of the log
        let mut keep = 0;
        let mut offset = 0;
        let total_lines = content.split_inclusive('\n').count();
        for (i, line) in content.split_inclusive('\n').enumerate() {
            offset += line.len();
            if line.trim().is_empty() {
                keep = offset;
                continue;
            }
            match serde_json::from_str::<Annotation>(line) {
                Ok(a) if line.ends_with('\n') => {
                    records.insert((a.question_id, a.annotator.clone()), a);
                    appended += 1;
                    keep = offset;
                }
                Ok(_) | Err(_) if i + 1 == total_lines => {
                    log::warn!("{}: dropping incomplete final record", path.display());
                }
                Ok(_) => unreachable!("only the final line can lack a newline"),
                Err(source) => {
                    return Err(Error::Json {
                        context: format!("{} line {}", path.display(), i + 1),
                        source,
                    })
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        if keep < content.len() {
            file.set_len(keep as u64).map_err(io_err(path))?;
        }
        Ok(AnnotationStore {
            path: Some(path.to_path_buf()),
            file: Some(file),
            records,
            appended,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Number of records in the log, including superseded ones.
    pub fn log_len(&self) -> usize {
        self.appended
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, question_id: u64, annotator: &str) -> Option<&Annotation> {
        self.records.get(&(question_id, annotator.to_string()))
    }

    /// Persists `annotation`. The record is on disk before this returns.
    pub fn insert(&mut self, annotation: Annotation, overwrite: bool) -> Result<InsertOutcome, StoreError> {
        let key = (annotation.question_id, annotation.annotator.clone());
        let exists = self.records.contains_key(&key);
        if exists && !overwrite {
            return Err(StoreError::Duplicate {
                question_id: key.0,
                annotator: key.1,
            });
        }
        if let (Some(file), Some(path)) = (self.file.as_mut(), self.path.as_ref()) {
            let mut line = serde_json::to_string(&annotation).expect("annotation serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
        }
        self.appended += 1;
        self.records.insert(key, annotation);
        Ok(if exists { InsertOutcome::Replaced } else { InsertOutcome::Created })
    }

    /// Current records ordered by (question_id, answer_id, annotator).
    pub fn all(&self) -> Vec<Annotation> {
        let mut out: Vec<Annotation> = self.records.values().cloned().collect();
        out.sort_by(|a, b| (a.question_id, a.answer_id, &a.annotator).cmp(&(b.question_id, b.answer_id, &b.annotator)));
        out
    }

    /// Questions this annotator has finished (status ok or not-applicable).
    pub fn finished_by(&self, annotator: &str) -> BTreeSet<u64> {
        self.records
            .values()
            .filter(|a| a.annotator == annotator && a.status != Status::NotSure)
            .map(|a| a.question_id)
            .collect()
    }

    pub fn counts_by_status(&self) -> BTreeMap<Status, usize> {
        let mut counts: BTreeMap<Status, usize> = [Status::Ok, Status::NotApplicable, Status::NotSure]
            .into_iter()
            .map(|s| (s, 0))
            .collect();
        for a in self.records.values() {
            *counts.entry(a.status).or_default() += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Span;

    fn ann(q: u64, who: &str, status: Status) -> Annotation {
        Annotation {
            question_id: q,
            answer_id: q * 10,
            intent: "intent".into(),
            intent_span: None,
            rewritten_intent: Some("better intent".into()),
            context_spans: vec![],
            snippet_spans: vec![Span {
                block_index: 0,
                line_start: 1,
                line_end: 1,
            }],
            status,
            annotator: who.into(),
            timestamp: 42,
        }
    }

    #[test]
    fn duplicate_needs_overwrite() {
        let mut s = AnnotationStore::in_memory();
        assert_eq!(s.insert(ann(1, "a", Status::Ok), false).unwrap(), InsertOutcome::Created);
        assert!(matches!(s.insert(ann(1, "a", Status::NotSure), false), Err(StoreError::Duplicate { .. })));
        assert_eq!(s.insert(ann(1, "b", Status::Ok), false).unwrap(), InsertOutcome::Created);
        assert_eq!(s.insert(ann(1, "a", Status::NotSure), true).unwrap(), InsertOutcome::Replaced);
        assert_eq!(s.get(1, "a").unwrap().status, Status::NotSure);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn replay_restores_last_writes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        {
            let mut s = AnnotationStore::open(&path).unwrap();
            s.insert(ann(1, "a", Status::Ok), false).unwrap();
            s.insert(ann(2, "a", Status::NotSure), false).unwrap();
            s.insert(ann(2, "a", Status::NotApplicable), true).unwrap();
        }
        let s = AnnotationStore::open(&path).unwrap();
        assert_eq!(s.log_len(), 3);
        assert_eq!(s.all(), vec![ann(1, "a", Status::Ok), ann(2, "a", Status::NotApplicable)]);
        assert_eq!(s.finished_by("a"), BTreeSet::from([1, 2]));
    }

    #[test]
    fn interrupted_append_is_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let good = serde_json::to_string(&ann(1, "a", Status::Ok)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"question_id\": 2, \"answ")).unwrap();
        let mut s = AnnotationStore::open(&path).unwrap();
        assert_eq!(s.len(), 1);
        s.insert(ann(3, "a", Status::Ok), false).unwrap();
        drop(s);
        let s = AnnotationStore::open(&path).unwrap();
        assert_eq!(s.all(), vec![ann(1, "a", Status::Ok), ann(3, "a", Status::Ok)]);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let good = serde_json::to_string(&ann(1, "a", Status::Ok)).unwrap();
        std::fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert!(AnnotationStore::open(&path).is_err());
    }

    #[test]
    fn progress_counts() {
        let mut s = AnnotationStore::in_memory();
        s.insert(ann(1, "a", Status::Ok), false).unwrap();
        s.insert(ann(2, "a", Status::NotSure), false).unwrap();
        let c = s.counts_by_status();
        assert_eq!((c[&Status::Ok], c[&Status::NotApplicable], c[&Status::NotSure]), (1, 0, 1));
        assert_eq!(s.finished_by("a"), BTreeSet::from([1]));
    }
}
