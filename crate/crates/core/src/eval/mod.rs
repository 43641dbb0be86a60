//! Gold labeling, ranked-list metrics and baselines.

mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{Annotation, Status};
use crate::candidates::CandidateSnippet;
use crate::error::{Error, Result};
use crate::ingest::QuestionThread;
use crate::types::{CandidateKey, Label};

pub use report::{curves_csv, svg_chart, EvalReport, SystemResult};

/// How a candidate is matched against an annotated snippet span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Matcher {
    /// Same block and identical line range.
    Exact,
    /// Same block and Jaccard overlap of line sets at least `threshold`.
    Jaccard { threshold: f64 },
}

fn jaccard(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter = (a.1.min(b.1) + 1).saturating_sub(a.0.max(b.0));
    let union = (a.1 - a.0 + 1) + (b.1 - b.0 + 1) - inter;
    inter as f64 / union as f64
}

/// Labels candidates of annotated questions. Only `ok` annotations count;
/// candidates of questions without one are left out.
pub fn label_candidates(
    candidates: &[CandidateKey],
    annotations: &[Annotation],
    threads: &[QuestionThread],
    matcher: Matcher,
) -> Result<BTreeMap<CandidateKey, Label>> {
    let by_id: BTreeMap<u64, &QuestionThread> = threads.iter().map(|t| (t.question_id, t)).collect();
    // (question, answer, block) -> gold line ranges
    let mut spans: BTreeMap<(u64, u64, usize), Vec<(usize, usize)>> = BTreeMap::new();
    let mut annotated = BTreeSet::new();
    for a in annotations.iter().filter(|a| a.status == Status::Ok) {
        let thread = by_id.get(&a.question_id).ok_or_else(|| {
            Error::Invalid(format!("annotation references unknown question {}", a.question_id))
        })?;
        for s in &a.snippet_spans {
            let block = thread.block(a.answer_id, s.block_index).ok_or_else(|| {
                Error::Invalid(format!(
                    "annotation of question {} references missing block a{}/b{}",
                    a.question_id, a.answer_id, s.block_index
                ))
            })?;
            if s.line_start == 0 || s.line_start > s.line_end || s.line_end > block.lines.len() {
                return Err(Error::Invalid(format!(
                    "annotation span {}-{} of q{}/a{}/b{} is outside the block's {} lines",
                    s.line_start,
                    s.line_end,
                    a.question_id,
                    a.answer_id,
                    s.block_index,
                    block.lines.len()
                )));
            }
            spans
                .entry((a.question_id, a.answer_id, s.block_index))
                .or_default()
                .push((s.line_start, s.line_end));
        }
        annotated.insert(a.question_id);
    }
    Ok(candidates
        .iter()
        .filter(|k| annotated.contains(&k.question_id))
        .map(|k| {
            let range = (k.line_start, k.line_end);
            let hit = spans
                .get(&(k.question_id, k.answer_id, k.block_index))
                .is_some_and(|gold| {
                    gold.iter().any(|g| match matcher {
                        Matcher::Exact => *g == range,
                        Matcher::Jaccard { threshold } => jaccard(*g, range) >= threshold,
                    })
                });
            (*k, if hit { Label::Positive } else { Label::Negative })
        })
        .collect())
}

/// Sorts by descending score, ties by ascending key.
pub fn rank(mut scored: Vec<(CandidateKey, f64)>) -> Vec<(CandidateKey, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Ranked items that have a gold label, with their labels.
fn labeled_ranking(ranked: &[(CandidateKey, f64)], gold: &BTreeMap<CandidateKey, Label>) -> Result<Vec<(f64, bool)>> {
    let items: Vec<(f64, bool)> = ranked
        .iter()
        .filter_map(|(k, s)| gold.get(k).map(|l| (*s, l.is_positive())))
        .collect();
    let pos = items.iter().filter(|i| i.1).count();
    if pos == 0 || pos == items.len() {
        return Err(Error::SingleClass);
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub k: usize,
    pub recall: f64,
    pub precision: f64,
}

/// Precision and recall at every prefix k = 1..N of the ranked list.
pub fn pr_curve(ranked: &[(CandidateKey, f64)], gold: &BTreeMap<CandidateKey, Label>) -> Result<Vec<PrPoint>> {
    let items = labeled_ranking(ranked, gold)?;
    let total_pos = items.iter().filter(|i| i.1).count() as f64;
    let mut tp = 0usize;
    Ok(items
        .iter()
        .enumerate()
        .map(|(i, (_, pos))| {
            tp += *pos as usize;
            PrPoint {
                k: i + 1,
                recall: tp as f64 / total_pos,
                precision: tp as f64 / (i + 1) as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points at every distinct score threshold, from (0,0) to (1,1).
/// Tied scores move together, so a tie contributes a diagonal segment.
pub fn roc_curve(ranked: &[(CandidateKey, f64)], gold: &BTreeMap<CandidateKey, Label>) -> Result<Vec<RocPoint>> {
    let items = labeled_ranking(ranked, gold)?;
    let p = items.iter().filter(|i| i.1).count() as f64;
    let n = items.len() as f64 - p;
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < items.len() {
        let score = items[i].0;
        while i < items.len() && items[i].0 == score {
            if items[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
        });
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn auc(roc: &[RocPoint]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Full block of accepted answers that contain exactly one block.
    AcceptOnly,
    /// Every full block of the kept answers.
    All,
    /// Seeded uniform scores for every candidate.
    Random,
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::AcceptOnly => "accept-only",
            Baseline::All => "all",
            Baseline::Random => "random",
        }
    }
}

/// Scores candidates for a baseline. Selected candidates score 1, others 0.
pub fn baseline_scores(candidates: &[CandidateSnippet], kind: Baseline, seed: u64) -> Vec<(CandidateKey, f64)> {
    let mut keys: Vec<&CandidateSnippet> = candidates.iter().collect();
    keys.sort_by_key(|c| c.key);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scored = keys
        .into_iter()
        .map(|c| {
            let s = match kind {
                Baseline::AcceptOnly => (c.is_full_block() && c.accepted && c.blocks_in_answer == 1) as u8 as f64,
                Baseline::All => c.is_full_block() as u8 as f64,
                Baseline::Random => rng.random::<f64>(),
            };
            (c.key, s)
        })
        .collect();
    rank(scored)
}
