use serde::{Deserialize, Serialize};

use super::model::{Direction, EncDecModel};
use super::tokenize::{tokenize_code, tokenize_nl};
use crate::error::{Error, Result};
use crate::types::CandidateKey;

/// The six correspondence values of one intent/candidate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceScores {
    /// log P(S | I)
    pub s_given_i: f64,
    /// log P(I | S)
    pub i_given_s: f64,
    pub prob_max: f64,
    pub prob_min: f64,
    pub norm_s_given_i: f64,
    pub norm_i_given_s: f64,
}

/// One line of `features-corr.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrRecord {
    #[serde(flatten)]
    pub key: CandidateKey,
    #[serde(flatten)]
    pub scores: CorrespondenceScores,
}

impl EncDecModel {
    /// log-probability of the model's target side given its source side,
    /// tokenized and truncated the way the model was trained.
    pub fn score_texts(&self, intent: &str, code: &str) -> Result<f64> {
        let mut i = tokenize_nl(intent);
        i.truncate(self.meta.max_intent_tokens);
        let mut c = tokenize_code(code);
        c.truncate(self.meta.max_code_tokens);
        match self.direction {
            Direction::IntentToSnippet => self.sequence_log_prob(&i, &c),
            Direction::SnippetToIntent => self.sequence_log_prob(&c, &i),
        }
    }
}

/// Z-scores with population standard deviation; a constant input gives zeros.
pub fn zscores(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Scores every candidate of one question in both directions and
/// normalizes each direction over the question's candidates.
pub fn score_page(
    i2s: &EncDecModel,
    s2i: &EncDecModel,
    intent: &str,
    candidates: &[&str],
) -> Result<Vec<CorrespondenceScores>> {
    if i2s.direction != Direction::IntentToSnippet || s2i.direction != Direction::SnippetToIntent {
        return Err(Error::Invalid("score_page needs an i2s and an s2i model".into()));
    }
    let mut sgi = Vec::with_capacity(candidates.len());
    let mut igs = Vec::with_capacity(candidates.len());
    for code in candidates {
        sgi.push(i2s.score_texts(intent, code)?);
        igs.push(s2i.score_texts(intent, code)?);
    }
    Ok(from_log_probs(&sgi, &igs))
}

/// Builds the six values from per-candidate directional log-probabilities.
pub fn from_log_probs(s_given_i: &[f64], i_given_s: &[f64]) -> Vec<CorrespondenceScores> {
    let zs = zscores(s_given_i);
    let zi = zscores(i_given_s);
    (0..s_given_i.len())
        .map(|k| CorrespondenceScores {
            s_given_i: s_given_i[k],
            i_given_s: i_given_s[k],
            prob_max: s_given_i[k].max(i_given_s[k]),
            prob_min: s_given_i[k].min(i_given_s[k]),
            norm_s_given_i: zs[k],
            norm_i_given_s: zi[k],
        })
        .collect()
}
