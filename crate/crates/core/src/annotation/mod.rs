//! Annotation records, validation, question sampling and the append-only store.

mod sampling;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::QuestionThread;

pub use sampling::{build_sampling_plan, weighted_sample, SamplingPlan, FIXED_SET_SIZE, SAMPLED_SET_SIZE};
pub use store::{AnnotationStore, InsertOutcome, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    NotApplicable,
    NotSure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NotApplicable => "not-applicable",
            Status::NotSure => "not-sure",
        }
    }
}

/// A line range within one code block of the annotated answer. Lines are 1-based, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub block_index: usize,
    pub line_start: usize,
    pub line_end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.block_index == other.block_index
            && self.line_start <= other.line_end
            && other.line_start <= self.line_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub question_id: u64,
    pub answer_id: u64,
    pub intent: String,
    /// Character offsets `[start, end)` of the intent within the title, if taken from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent_span: Option<[usize; 2]>,
    #[serde(default)]
    pub rewritten_intent: Option<String>,
    #[serde(default)]
    pub context_spans: Vec<Span>,
    #[serde(default)]
    pub snippet_spans: Vec<Span>,
    pub status: Status,
    pub annotator: String,
    /// Unix seconds.
    #[serde(default)]
    pub timestamp: u64,
}

/// A validation failure tied to one request field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn err(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.into(),
        message: message.into(),
    }
}

impl Annotation {
    /// Checks every invariant against the thread it annotates.
    pub fn validate(&self, thread: &QuestionThread) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if thread.question_id != self.question_id {
            errors.push(err("question_id", "does not match the thread"));
        }
        if self.annotator.trim().is_empty() {
            errors.push(err("annotator", "must not be empty"));
        }
        if let Some([s, e]) = self.intent_span {
            let len = thread.title.chars().count();
            if s >= e || e > len {
                errors.push(err("intent_span", format!("[{s}, {e}) is not a range within the {len}-character title")));
            }
        }
        match self.status {
            Status::Ok => {
                if self.intent.trim().is_empty() {
                    errors.push(err("intent", "must not be empty"));
                }
                if self.snippet_spans.is_empty() {
                    errors.push(err("snippet_spans", "status ok needs at least one snippet span"));
                }
            }
            Status::NotApplicable => {
                if !self.snippet_spans.is_empty() {
                    errors.push(err("snippet_spans", "must be empty when status is not-applicable"));
                }
                if !self.context_spans.is_empty() {
                    errors.push(err("context_spans", "must be empty when status is not-applicable"));
                }
            }
            Status::NotSure => {}
        }
        let Some(answer) = thread.answer(self.answer_id) else {
            errors.push(err("answer_id", format!("answer {} is not among the question's answers", self.answer_id)));
            return Err(errors);
        };
        let block_len: BTreeMap<usize, usize> = answer.blocks.iter().map(|b| (b.index, b.lines.len())).collect();
        for (name, spans) in [("snippet_spans", &self.snippet_spans), ("context_spans", &self.context_spans)] {
            for (i, s) in spans.iter().enumerate() {
                let field = format!("{name}[{i}]");
                match block_len.get(&s.block_index) {
                    None => errors.push(err(format!("{field}.block_index"), format!("answer has no block {}", s.block_index))),
                    Some(&n) => {
                        if s.line_start == 0 || s.line_start > s.line_end {
                            errors.push(err(
                                format!("{field}.line_start"),
                                format!("line range {}-{} is empty or not 1-based", s.line_start, s.line_end),
                            ));
                        } else if s.line_end > n {
                            errors.push(err(format!("{field}.line_end"), format!("line {} is beyond the block's {n} lines", s.line_end)));
                        }
                    }
                }
            }
        }
        for (i, s) in self.snippet_spans.iter().enumerate() {
            for (j, c) in self.context_spans.iter().enumerate() {
                if s.overlaps(c) {
                    errors.push(err(format!("context_spans[{j}]"), format!("overlaps snippet_spans[{i}]")));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Gold records: status ok only, ordered by (question_id, answer_id, annotator).
pub fn export_gold(annotations: &[Annotation]) -> Vec<Annotation> {
    let mut out: Vec<Annotation> = annotations.iter().filter(|a| a.status == Status::Ok).cloned().collect();
    out.sort_by(|a, b| (a.question_id, a.answer_id, &a.annotator).cmp(&(b.question_id, b.answer_id, &b.annotator)));
    out
}

/// One JSON object per line, each terminated by a newline.
pub fn to_jsonl(annotations: &[Annotation]) -> String {
    let mut s = String::new();
    for a in annotations {
        s.push_str(&serde_json::to_string(a).expect("annotation serializes"));
        s.push('\n');
    }
    s
}

pub fn parse_jsonl(text: &str) -> crate::Result<Vec<Annotation>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| crate::Error::Json {
                context: format!("annotation line {}", i + 1),
                source,
            })
        })
        .collect()
}
