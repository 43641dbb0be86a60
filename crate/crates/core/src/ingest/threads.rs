use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::dump::{PostType, RawPost};
use super::html::extract_code_blocks_with_warnings;
use crate::types::Language;

/// Number of answers kept per question, by descending score.
pub const MAX_ANSWERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub index: usize,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub answer_id: u64,
    pub score: i64,
    pub accepted: bool,
    /// 1-based position among the question's answers sorted by descending score.
    pub rank: usize,
    pub blocks: Vec<BlockEntry>,
}

/// A question with its top-ranked answers. Serializes to one `threads.jsonl` record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionThread {
    pub question_id: u64,
    /// The question title, used as the intent.
    pub title: String,
    pub language: Language,
    pub view_count: Option<u64>,
    pub answers: Vec<AnswerEntry>,
}

/// Borrowed view of one display code block together with its answer metadata.
#[derive(Debug, Clone, Copy)]
pub struct CodeBlock<'a> {
    pub question_id: u64,
    pub answer_id: u64,
    pub block_index: usize,
    pub lines: &'a [String],
    pub answer_rank: usize,
    pub is_accepted: bool,
    /// Number of display blocks in the enclosing answer.
    pub blocks_in_answer: usize,
}

impl QuestionThread {
    pub fn intent(&self) -> &str {
        &self.title
    }

    pub fn code_blocks(&self) -> impl Iterator<Item = CodeBlock<'_>> + '_ {
        self.answers.iter().flat_map(move |a| {
            a.blocks.iter().map(move |b| CodeBlock {
                question_id: self.question_id,
                answer_id: a.answer_id,
                block_index: b.index,
                lines: &b.lines,
                answer_rank: a.rank,
                is_accepted: a.accepted,
                blocks_in_answer: a.blocks.len(),
            })
        })
    }

    pub fn answer(&self, answer_id: u64) -> Option<&AnswerEntry> {
        self.answers.iter().find(|a| a.answer_id == answer_id)
    }

    pub fn block(&self, answer_id: u64, block_index: usize) -> Option<CodeBlock<'_>> {
        self.code_blocks()
            .find(|b| b.answer_id == answer_id && b.block_index == block_index)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssemblyStats {
    pub questions: usize,
    pub orphan_answers: usize,
    pub dropped_without_code: usize,
    pub html_warnings: usize,
}

struct PendingAnswer {
    id: u64,
    score: i64,
    body_html: String,
}

/// Groups posts into threads for questions tagged `language`.
///
/// Answers are ranked by descending score with ascending id breaking ties,
/// and only the top [`MAX_ANSWERS`] are kept. Questions none of whose kept
/// answers contain a display code block are dropped.
pub fn assemble_threads<I>(posts: I, language: &Language) -> (Vec<QuestionThread>, AssemblyStats)
where
    I: IntoIterator<Item = RawPost>,
{
    let mut stats = AssemblyStats::default();
    let mut all_questions = HashSet::new();
    let mut questions: BTreeMap<u64, RawPost> = BTreeMap::new();
    let mut answers: HashMap<u64, Vec<PendingAnswer>> = HashMap::new();

    for post in posts {
        match post.post_type {
            PostType::Question => {
                all_questions.insert(post.id);
                if post.tags.iter().any(|t| t == language.as_str()) {
                    questions.insert(post.id, post);
                }
            }
            PostType::Answer => {
                // parent_id is always set for answers by the dump reader
                let parent = post.parent_id.unwrap_or_default();
                answers.entry(parent).or_default().push(PendingAnswer {
                    id: post.id,
                    score: post.score,
                    body_html: post.body_html,
                });
            }
        }
    }
    stats.orphan_answers = answers
        .iter()
        .filter(|(parent, _)| !all_questions.contains(parent))
        .map(|(_, list)| list.len())
        .sum();

    let mut threads = Vec::new();
    for (qid, question) in questions {
        let mut pending = answers.remove(&qid).unwrap_or_default();
        pending.sort_by(|a, b| b.score.cmp(&a.score).then(a.id.cmp(&b.id)));
        pending.truncate(MAX_ANSWERS);

        let entries: Vec<AnswerEntry> = pending
            .into_iter()
            .enumerate()
            .map(|(pos, ans)| {
                let extraction = extract_code_blocks_with_warnings(&ans.body_html);
                stats.html_warnings += extraction.warnings;
                AnswerEntry {
                    answer_id: ans.id,
                    score: ans.score,
                    accepted: question.accepted_answer_id == Some(ans.id),
                    rank: pos + 1,
                    blocks: extraction
                        .blocks
                        .into_iter()
                        .enumerate()
                        .map(|(index, lines)| BlockEntry { index, lines })
                        .collect(),
                }
            })
            .collect();

        let title = question.title.unwrap_or_default();
        if entries.iter().all(|a| a.blocks.is_empty()) || title.trim().is_empty() {
            stats.dropped_without_code += 1;
            continue;
        }
        threads.push(QuestionThread {
            question_id: qid,
            title,
            language: language.clone(),
            view_count: question.view_count,
            answers: entries,
        });
    }
    stats.questions = threads.len();
    (threads, stats)
}
