//! Domain types shared by every stage of the mining pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A programming language tag as it appears in the dump, lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Language(String);

impl Language {
    pub fn new(tag: &str) -> Self {
        Language(tag.trim().to_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Languages whose block structure is expressed through indentation.
    pub fn is_indentation_sensitive(&self) -> bool {
        matches!(self.0.as_str(), "python" | "python-3.x" | "python-2.7")
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unique address of a candidate snippet: one line span of one code block.
///
/// Ordering is lexicographic over the fields, which is the canonical
/// tie-break order used throughout ranking and output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateKey {
    pub question_id: u64,
    pub answer_id: u64,
    pub block_index: usize,
    pub line_start: usize,
    pub line_end: usize,
}

impl CandidateKey {
    pub fn num_lines(&self) -> usize {
        self.line_end + 1 - self.line_start
    }
}

impl fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q{}/a{}/b{}/{}-{}",
            self.question_id, self.answer_id, self.block_index, self.line_start, self.line_end
        )
    }
}

/// Gold or predicted label of an (intent, snippet) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+1")]
    Positive,
    #[serde(rename = "-1")]
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}
