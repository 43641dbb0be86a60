//! How-to question filters.

use std::collections::HashSet;

use super::threads::QuestionThread;

pub trait HowToFilter: Send + Sync {
    fn is_howto(&self, thread: &QuestionThread) -> bool;
}

/// Phrases that mark a title as a request for a procedure.
const HOWTO_PHRASES: &[&str] = &[
    "how to ",
    "how do i ",
    "how do you ",
    "how can i ",
    "how could i ",
    "how would i ",
    "how should i ",
    "how does one ",
    "how can you ",
    "how can we ",
    "how do we ",
    "best way to ",
    "easiest way to ",
    "simplest way to ",
    "fastest way to ",
    "is there a way to ",
    "is it possible to ",
];

/// Imperative verbs that may open a how-to title ("Convert a list to ...").
/// The gerund form ("Converting ...") is also accepted.
const LEADING_VERBS: &[&str] = &[
    "access", "add", "append", "calculate", "call", "cast", "catch", "clone", "connect", "change", "check", "combine", "compare",
    "concatenate", "convert", "copy", "count", "create", "declare", "decode", "delete", "detect",
    "determine", "display", "download", "encode", "execute", "extract", "fill", "filter", "find", "flatten",
    "format", "generate", "get", "group", "import", "initialize", "insert", "install", "iterate", "join",
    "list", "load", "loop", "make", "merge", "open", "parse", "pass", "print", "read", "remove",
    "rename", "replace", "return", "reverse", "round", "run", "save", "select", "send", "set",
    "shuffle", "sort", "split", "start", "stop", "strip", "sum", "take", "test", "transpose", "trim", "update", "use", "write",
];

/// Titles opening with these words ask for an explanation, not a procedure.
const EXPLANATION_OPENERS: &[&str] = &["why", "what's", "whats", "when", "who", "where"];

fn verb_stem_matches(word: &str) -> bool {
    if LEADING_VERBS.contains(&word) {
        return true;
    }
    let Some(stem) = word.strip_suffix("ing") else {
        return false;
    };
    if LEADING_VERBS.contains(&stem) {
        return true;
    }
    // removing -> remove
    if LEADING_VERBS.iter().any(|v| v.strip_suffix('e') == Some(stem)) {
        return true;
    }
    // setting -> set
    let bytes = stem.as_bytes();
    bytes.len() >= 2
        && bytes[bytes.len() - 1] == bytes[bytes.len() - 2]
        && LEADING_VERBS.contains(&&stem[..stem.len() - 1])
}

/// Keyword heuristic over the title.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordHowTo;

impl KeywordHowTo {
    pub fn matches_title(title: &str) -> bool {
        let lower = format!("{} ", title.trim().to_lowercase());
        if HOWTO_PHRASES.iter().any(|p| lower.contains(p)) {
            return true;
        }
        // "Python: take the content of ..." -> "take the content of ..."
        let body = match lower.split_once(':') {
            Some((prefix, rest)) if !prefix.trim().contains(' ') => rest,
            _ => lower.as_str(),
        };
        let first = body
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .find(|w| !w.is_empty())
            .unwrap_or("");
        if EXPLANATION_OPENERS.contains(&first) {
            return false;
        }
        verb_stem_matches(first)
    }
}

impl HowToFilter for KeywordHowTo {
    fn is_howto(&self, thread: &QuestionThread) -> bool {
        Self::matches_title(&thread.title)
    }
}

/// Accepts exactly the listed question ids.
#[derive(Debug, Clone, Default)]
pub struct IdListHowTo {
    ids: HashSet<u64>,
}

impl IdListHowTo {
    pub fn new(ids: impl IntoIterator<Item = u64>) -> Self {
        IdListHowTo {
            ids: ids.into_iter().collect(),
        }
    }

    /// One id per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self, std::num::ParseIntError> {
        let ids = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<HashSet<u64>, _>>()?;
        Ok(IdListHowTo { ids })
    }
}

impl HowToFilter for IdListHowTo {
    fn is_howto(&self, thread: &QuestionThread) -> bool {
        self.ids.contains(&thread.question_id)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAllHowTo;

impl HowToFilter for AcceptAllHowTo {
    fn is_howto(&self, _thread: &QuestionThread) -> bool {
        true
    }
}

pub fn filter_howto(thread: &QuestionThread, filter: &dyn HowToFilter) -> bool {
    filter.is_howto(thread)
}
