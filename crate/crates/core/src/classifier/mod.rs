//! Pair features and the logistic-regression ranker.

mod cv;
mod logistic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corr::CorrRecord;
use crate::error::{Error, Result};
use crate::features::{StructuralRecord, IS_VALUE, STRUCTURAL_FEATURES};
use crate::types::{CandidateKey, Label};

pub use cv::{assign_folds, cross_validate, transfer_apply, CvResult};
pub use logistic::{fit, standardize_columns, ClassifierModel, ColumnStats, FitConfig, FitReport};

pub const S_GIVEN_I: &str = "SGivenI";
pub const I_GIVEN_S: &str = "IGivenS";
pub const PROB_MAX: &str = "ProbMax";
pub const PROB_MIN: &str = "ProbMin";
pub const NORM_S_GIVEN_I: &str = "NormalizedSGivenI";
pub const NORM_I_GIVEN_S: &str = "NormalizedIGivenS";

pub const CORRESPONDENCE_FEATURES: [&str; 6] =
    [S_GIVEN_I, I_GIVEN_S, PROB_MAX, PROB_MIN, NORM_S_GIVEN_I, NORM_I_GIVEN_S];

/// Which feature families enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    Full,
    StructuralOnly,
    CorrespondenceOnly,
}

impl FeatureSet {
    pub fn uses_structural(self) -> bool {
        self != FeatureSet::CorrespondenceOnly
    }

    pub fn uses_correspondence(self) -> bool {
        self != FeatureSet::StructuralOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Full => "full",
            FeatureSet::StructuralOnly => "structural-only",
            FeatureSet::CorrespondenceOnly => "correspondence-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub feature_set: FeatureSet,
    /// Drops language-specific features (IsValue).
    pub cross_lingual: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            feature_set: FeatureSet::Full,
            cross_lingual: false,
        }
    }
}

/// Ordered feature names for a given option set.
pub fn registry(opts: &AssembleOptions) -> Vec<String> {
    let mut names = Vec::new();
    if opts.feature_set.uses_structural() {
        names.extend(
            STRUCTURAL_FEATURES
                .iter()
                .filter(|n| !(opts.cross_lingual && **n == IS_VALUE))
                .map(|n| n.to_string()),
        );
    }
    if opts.feature_set.uses_correspondence() {
        names.extend(CORRESPONDENCE_FEATURES.iter().map(|n| n.to_string()));
    }
    names
}

/// Feature values of one pair, aligned with a registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatureVector {
    pub key: CandidateKey,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

impl PairFeatureVector {
    pub fn named(&self, names: &[String]) -> BTreeMap<String, f64> {
        names.iter().cloned().zip(self.values.iter().copied()).collect()
    }
}

/// Joins structural and correspondence records on candidate key.
///
/// Only the sources the feature set needs are consulted; an unused source
/// may be empty. Output is sorted by key.
pub fn assemble_features(
    structural: &[StructuralRecord],
    correspondence: &[CorrRecord],
    opts: &AssembleOptions,
) -> Result<(Vec<String>, Vec<PairFeatureVector>)> {
    let names = registry(opts);
    let use_s = opts.feature_set.uses_structural();
    let use_c = opts.feature_set.uses_correspondence();
    let s_map: BTreeMap<CandidateKey, &StructuralRecord> = if use_s {
        structural.iter().map(|r| (r.key, r)).collect()
    } else {
        BTreeMap::new()
    };
    let c_map: BTreeMap<CandidateKey, &CorrRecord> = if use_c {
        correspondence.iter().map(|r| (r.key, r)).collect()
    } else {
        BTreeMap::new()
    };
    if use_s && use_c {
        let unmatched: Vec<String> = s_map
            .keys()
            .filter(|k| !c_map.contains_key(k))
            .chain(c_map.keys().filter(|k| !s_map.contains_key(k)))
            .take(10)
            .map(|k| k.to_string())
            .collect();
        if !unmatched.is_empty() {
            return Err(Error::UnmatchedKey(unmatched.join(", ")));
        }
    }
    let keys: Vec<CandidateKey> = if use_s {
        s_map.keys().copied().collect()
    } else {
        c_map.keys().copied().collect()
    };
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let mut values = Vec::with_capacity(names.len());
        if let Some(s) = s_map.get(&key) {
            for n in STRUCTURAL_FEATURES {
                if opts.cross_lingual && n == IS_VALUE {
                    continue;
                }
                values.push(s.features.get(n).copied().unwrap_or(0.0));
            }
        }
        if let Some(c) = c_map.get(&key) {
            let sc = &c.scores;
            values.extend([
                sc.s_given_i,
                sc.i_given_s,
                sc.prob_max,
                sc.prob_min,
                sc.norm_s_given_i,
                sc.norm_i_given_s,
            ]);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature(format!("{} of {key}", names[i])));
        }
        out.push(PairFeatureVector {
            key,
            values,
            label: None,
        });
    }
    Ok((names, out))
}

/// Attaches gold labels; vectors without a label are dropped.
pub fn attach_labels(
    vectors: Vec<PairFeatureVector>,
    labels: &BTreeMap<CandidateKey, Label>,
) -> Vec<PairFeatureVector> {
    vectors
        .into_iter()
        .filter_map(|mut v| {
            v.label = Some(*labels.get(&v.key)?);
            Some(v)
        })
        .collect()
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub key: CandidateKey,
    pub fold: Option<usize>,
    pub probability: f64,
}
