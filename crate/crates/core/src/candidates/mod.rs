//! Candidate snippet enumeration and filtering.

mod normalize;
pub mod validate;

use serde::{Deserialize, Serialize};

pub use normalize::normalize_snippet;
pub use validate::{AcceptAll, ExternalCommand, SnippetValidator, Structural, Validity};

use crate::ingest::{CodeBlock, HowToFilter, QuestionThread};
use crate::types::{CandidateKey, Language};

/// Blocks longer than this are truncated before enumeration.
pub const MAX_BLOCK_LINES: usize = 200;

/// One line-contiguous fragment of a code block. Serializes to one
/// `candidates.jsonl` record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSnippet {
    #[serde(flatten)]
    pub key: CandidateKey,
    pub text: String,
    pub normalized_text: String,
    pub answer_rank: usize,
    pub accepted: bool,
    /// Line count of the (possibly truncated) enclosing block.
    pub block_lines: usize,
    pub blocks_in_answer: usize,
}

impl CandidateSnippet {
    pub fn num_lines(&self) -> usize {
        self.key.num_lines()
    }

    pub fn is_full_block(&self) -> bool {
        self.key.line_start == 1 && self.key.line_end == self.block_lines
    }
}

/// Every (start <= end) line span of `block`, ordered by (start, end).
///
/// A block of k lines yields k(k+1)/2 candidates.
pub fn enumerate_candidates(block: &CodeBlock<'_>, language: &Language) -> Vec<CandidateSnippet> {
    let lines = &block.lines[..block.lines.len().min(MAX_BLOCK_LINES)];
    let k = lines.len();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for start in 1..=k {
        for end in start..=k {
            let text = lines[start - 1..end].join("\n");
            let normalized_text = normalize_snippet(&text, language);
            out.push(CandidateSnippet {
                key: CandidateKey {
                    question_id: block.question_id,
                    answer_id: block.answer_id,
                    block_index: block.block_index,
                    line_start: start,
                    line_end: end,
                },
                text,
                normalized_text,
                answer_rank: block.answer_rank,
                accepted: block.is_accepted,
                block_lines: k,
                blocks_in_answer: block.blocks_in_answer,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub enumerated: usize,
    pub valid: usize,
    pub invalid: usize,
    pub unknown: usize,
    pub validator_errors: usize,
    pub truncated_blocks: usize,
    pub filtered_questions: usize,
}

/// Outcome of validating one candidate.
pub fn validate_candidate(
    candidate: &CandidateSnippet,
    validator: &dyn SnippetValidator,
    permissive: bool,
    stats: &mut CandidateStats,
) -> bool {
    match validator.validate(&candidate.normalized_text) {
        Ok(Validity::Valid) => {
            stats.valid += 1;
            true
        }
        Ok(Validity::Invalid) => {
            stats.invalid += 1;
            false
        }
        Ok(Validity::Unknown) => {
            stats.unknown += 1;
            permissive
        }
        Err(msg) => {
            log::warn!("validator failed on {}: {msg}", candidate.key);
            stats.validator_errors += 1;
            false
        }
    }
}

/// Enumerates and validates the candidates of all how-to threads. Output is
/// sorted by candidate key.
pub fn generate_candidates(
    threads: &[QuestionThread],
    howto: &dyn HowToFilter,
    validator: &dyn SnippetValidator,
    permissive: bool,
) -> (Vec<CandidateSnippet>, CandidateStats) {
    let mut stats = CandidateStats::default();
    let mut out = Vec::new();
    for thread in threads {
        if !howto.is_howto(thread) {
            stats.filtered_questions += 1;
            continue;
        }
        for block in thread.code_blocks() {
            if block.lines.len() > MAX_BLOCK_LINES {
                log::info!(
                    "truncating block q{}/a{}/b{} from {} lines",
                    block.question_id,
                    block.answer_id,
                    block.block_index,
                    block.lines.len()
                );
                stats.truncated_blocks += 1;
            }
            let candidates = enumerate_candidates(&block, &thread.language);
            stats.enumerated += candidates.len();
            out.extend(
                candidates
                    .into_iter()
                    .filter(|c| validate_candidate(c, validator, permissive, &mut stats)),
            );
        }
    }
    out.sort_by_key(|c| c.key);
    (out, stats)
}
