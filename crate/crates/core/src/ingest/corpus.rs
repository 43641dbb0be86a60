use serde::{Deserialize, Serialize};

use super::threads::QuestionThread;

/// One heuristic (intent, code block) training pair for the correspondence model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPair {
    pub intent: String,
    pub code: String,
    pub question_id: u64,
}

/// Pairs each title with the code of its accepted answer when that answer
/// has exactly one display block. Output is ordered by question id.
pub fn build_corr_corpus(threads: &[QuestionThread]) -> Vec<CorpusPair> {
    let mut pairs: Vec<CorpusPair> = threads
        .iter()
        .filter_map(|t| {
            let accepted = t.answers.iter().find(|a| a.accepted)?;
            match accepted.blocks.as_slice() {
                [only] => Some(CorpusPair {
                    intent: t.title.clone(),
                    code: only.lines.join("\n"),
                    question_id: t.question_id,
                }),
                _ => None,
            }
        })
        .collect();
    pairs.sort_by_key(|p| p.question_id);
    pairs
}
