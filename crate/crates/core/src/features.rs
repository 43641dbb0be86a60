//! Hand-crafted structural features of an (intent, candidate) pair.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSnippet;
use crate::error::{Error, Result};
use crate::ingest::QuestionThread;
use crate::types::{CandidateKey, Language};

pub const FULL_BLOCK: &str = "FullBlock";
pub const START_OF_BLOCK: &str = "StartOfBlock";
pub const END_OF_BLOCK: &str = "EndOfBlock";
pub const CONTAINS_IMPORT: &str = "ContainsImport";
pub const STARTS_WITH_ASSIGNMENT: &str = "StartsWithAssignment";
pub const IS_VALUE: &str = "IsValue";
pub const ACCEPTED_ANS: &str = "AcceptedAns";
pub const POST_RANK: [&str; 3] = ["PostRank1", "PostRank2", "PostRank3"];
pub const ONLY_BLOCK: &str = "OnlyBlock";
pub const NUM_LINES: [&str; 7] = [
    "NumLines1",
    "NumLines2",
    "NumLines3",
    "NumLines4to5",
    "NumLines6to10",
    "NumLines11to15",
    "NumLinesGT15",
];
pub const COMBO_ACCEPTED_ONLY_WHOLE: &str = "ComboAcceptedOnlyWhole";
pub const COMBO_NO_ASSIGN_END_OF_BLOCK: &str = "ComboNoAssignEndOfBlock";
pub const COMBO_NO_ASSIGN_ONE_LINE: &str = "ComboNoAssignOneLine";

/// All structural feature names in registry order.
pub const STRUCTURAL_FEATURES: [&str; 21] = [
    FULL_BLOCK,
    START_OF_BLOCK,
    END_OF_BLOCK,
    CONTAINS_IMPORT,
    STARTS_WITH_ASSIGNMENT,
    IS_VALUE,
    ACCEPTED_ANS,
    POST_RANK[0],
    POST_RANK[1],
    POST_RANK[2],
    ONLY_BLOCK,
    NUM_LINES[0],
    NUM_LINES[1],
    NUM_LINES[2],
    NUM_LINES[3],
    NUM_LINES[4],
    NUM_LINES[5],
    NUM_LINES[6],
    COMBO_ACCEPTED_ONLY_WHOLE,
    COMBO_NO_ASSIGN_END_OF_BLOCK,
    COMBO_NO_ASSIGN_ONE_LINE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructuralFeatureVector {
    pub full_block: bool,
    pub start_of_block: bool,
    pub end_of_block: bool,
    pub contains_import: bool,
    pub starts_with_assignment: bool,
    pub is_value: bool,
    pub accepted_ans: bool,
    /// 1-based answer rank if within the top three.
    pub post_rank: Option<usize>,
    pub only_block: bool,
    pub num_lines: usize,
}

/// Index into [`NUM_LINES`] for a snippet of `n` lines.
pub fn num_lines_bucket(n: usize) -> usize {
    match n {
        0 | 1 => 0,
        2 => 1,
        3 => 2,
        4..=5 => 3,
        6..=10 => 4,
        11..=15 => 5,
        _ => 6,
    }
}

impl StructuralFeatureVector {
    pub fn combo_accepted_only_whole(&self) -> bool {
        self.accepted_ans && self.only_block && self.full_block
    }

    pub fn combo_no_assign_end_of_block(&self) -> bool {
        !self.starts_with_assignment && self.end_of_block
    }

    pub fn combo_no_assign_one_line(&self) -> bool {
        !self.starts_with_assignment && self.num_lines == 1
    }

    /// Feature values in [`STRUCTURAL_FEATURES`] order.
    pub fn values(&self) -> [f64; 21] {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        let mut v = [0.0; 21];
        v[0] = b(self.full_block);
        v[1] = b(self.start_of_block);
        v[2] = b(self.end_of_block);
        v[3] = b(self.contains_import);
        v[4] = b(self.starts_with_assignment);
        v[5] = b(self.is_value);
        v[6] = b(self.accepted_ans);
        if let Some(rank @ 1..=3) = self.post_rank {
            v[6 + rank] = 1.0;
        }
        v[10] = b(self.only_block);
        v[11 + num_lines_bucket(self.num_lines)] = 1.0;
        v[18] = b(self.combo_accepted_only_whole());
        v[19] = b(self.combo_no_assign_end_of_block());
        v[20] = b(self.combo_no_assign_one_line());
        v
    }

    pub fn named(&self) -> BTreeMap<String, f64> {
        STRUCTURAL_FEATURES
            .iter()
            .zip(self.values())
            .map(|(name, value)| (name.to_string(), value))
            .collect()
    }
}

/// One `features-structural.jsonl` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralRecord {
    #[serde(flatten)]
    pub key: CandidateKey,
    pub features: BTreeMap<String, f64>,
}

fn is_comment(line: &str, language: &Language) -> bool {
    let t = line.trim_start();
    if language.is_indentation_sensitive() {
        t.starts_with('#')
    } else {
        t.starts_with("//") || t.starts_with("/*") || t.starts_with('*')
    }
}

fn is_import_line(line: &str, language: &Language) -> bool {
    let t = line.trim_start();
    if language.is_indentation_sensitive() {
        t.starts_with("import ") || t.starts_with("from ")
    } else {
        t.starts_with("import ")
    }
}

/// Whether `line` is a simple assignment: a single `=` at the top nesting
/// level that is not part of `==`, `<=`, `>=` or `!=`.
pub fn detect_assignment(line: &str, language: &Language) -> bool {
    let python = language.is_indentation_sensitive();
    let chars: Vec<char> = line.trim().chars().collect();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if let Some(q) = quote {
            if c == '\\' {
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '#' if python => return false,
            '/' if !python && chars.get(i + 1) == Some(&'/') => return false,
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            '=' if depth == 0 => {
                let prev = if i > 0 { chars[i - 1] } else { ' ' };
                let next = chars.get(i + 1).copied().unwrap_or(' ');
                if next == '=' {
                    // skip the whole `==`
                    i += 2;
                    continue;
                }
                if !matches!(prev, '=' | '!' | '<' | '>') {
                    return true;
                }
            }
            _ => {}
        }
        i += 1;
    }
    false
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn is_number(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_')
}

fn is_string_literal(s: &str) -> bool {
    let body = s.trim_start_matches(|c: char| "rRbBuUfF".contains(c));
    for q in ["\"\"\"", "'''", "\"", "'"] {
        if body.len() >= 2 * q.len() && body.starts_with(q) && body.ends_with(q) {
            let inner = &body[q.len()..body.len() - q.len()];
            return !inner.contains(q) || q.len() == 3;
        }
    }
    false
}

/// Bracketed literal containing only values, e.g. `[1, 2, 3]` or `{'a': 1}`.
fn is_container_literal(s: &str) -> bool {
    let (open, close) = match s.chars().next() {
        Some('[') => ('[', ']'),
        Some('(') => ('(', ')'),
        Some('{') => ('{', '}'),
        _ => return false,
    };
    if !s.ends_with(close) {
        return false;
    }
    let inner = &s[open.len_utf8()..s.len() - close.len_utf8()];
    if inner.trim().is_empty() {
        return true;
    }
    split_top_level(inner).iter().all(|item| {
        let item = item.trim();
        if item.is_empty() {
            return true;
        }
        match item.split_once(':') {
            Some((k, v)) if open == '{' && !is_string_literal(item) => {
                is_literal(k.trim()) && is_literal(v.trim())
            }
            _ => is_literal(item),
        }
    })
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut quote = None;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '(' | '[' | '{') => depth += 1,
            (None, ')' | ']' | '}') => depth -= 1,
            (None, ',') if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn is_literal(s: &str) -> bool {
    is_number(s)
        || is_string_literal(s)
        || matches!(s, "True" | "False" | "None" | "true" | "false" | "null")
        || is_container_literal(s)
}

/// Whether a single-line snippet is only a variable, attribute chain or
/// literal: no call, operator or assignment. Multi-line snippets are never values.
pub fn detect_value(text: &str, _language: &Language) -> bool {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let [line] = lines.as_slice() else {
        return false;
    };
    let line = line.trim().trim_end_matches(';').trim_end();
    if line.is_empty() {
        return false;
    }
    if line.split('.').all(is_identifier) {
        return !matches!(
            line,
            "pass" | "break" | "continue" | "return" | "import" | "del" | "raise" | "yield"
        );
    }
    is_literal(line)
}

/// Computes all structural features of `candidate` within `thread`.
pub fn extract_structural(
    candidate: &CandidateSnippet,
    thread: &QuestionThread,
    language: &Language,
) -> Result<StructuralFeatureVector> {
    let key = candidate.key;
    let mismatch = || Error::ThreadMismatch {
        key: key.to_string(),
        question_id: thread.question_id,
    };
    if key.question_id != thread.question_id {
        return Err(mismatch());
    }
    let answer = thread.answer(key.answer_id).ok_or_else(mismatch)?;
    let block = answer
        .blocks
        .iter()
        .find(|b| b.index == key.block_index)
        .ok_or_else(mismatch)?;
    let block_len = block.lines.len().min(crate::candidates::MAX_BLOCK_LINES);
    if key.line_start < 1 || key.line_end < key.line_start || key.line_end > block_len {
        return Err(mismatch());
    }

    let text = &candidate.normalized_text;
    let first_statement = text
        .lines()
        .find(|l| !l.trim().is_empty() && !is_comment(l, language))
        .unwrap_or("");
    let start_of_block = key.line_start == 1;
    let end_of_block = key.line_end == block_len;
    Ok(StructuralFeatureVector {
        full_block: start_of_block && end_of_block,
        start_of_block,
        end_of_block,
        contains_import: text.lines().any(|l| is_import_line(l, language)),
        starts_with_assignment: detect_assignment(first_statement, language),
        is_value: language.is_indentation_sensitive() && detect_value(text, language),
        accepted_ans: answer.accepted,
        post_rank: (answer.rank <= 3).then_some(answer.rank),
        only_block: answer.blocks.len() == 1,
        num_lines: key.num_lines(),
    })
}
