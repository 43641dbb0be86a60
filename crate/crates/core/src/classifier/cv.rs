use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::logistic::{fit, standardize_columns, ClassifierModel, FitConfig};
use super::{PairFeatureVector, Prediction};
use crate::error::{Error, Result};

/// Question-level fold assignment: sorted ids, seeded shuffle, fold = position mod k.
pub fn assign_folds(question_ids: impl IntoIterator<Item = u64>, k: usize, seed: u64) -> Result<BTreeMap<u64, usize>> {
    let mut ids: Vec<u64> = question_ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > ids.len() {
        return Err(Error::Invalid(format!("{k} folds but only {} questions", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ids.into_iter().enumerate().map(|(i, q)| (q, i % k)).collect())
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub models: Vec<ClassifierModel>,
    /// Out-of-fold predictions for every labeled vector, sorted by key.
    pub predictions: Vec<Prediction>,
    pub folds: BTreeMap<u64, usize>,
}

/// k-fold cross-validation with folds split by question.
pub fn cross_validate(
    names: &[String],
    data: &[PairFeatureVector],
    k: usize,
    cfg: &FitConfig,
    seed: u64,
) -> Result<CvResult> {
    let labeled: Vec<&PairFeatureVector> = data.iter().filter(|v| v.label.is_some()).collect();
    let folds = assign_folds(labeled.iter().map(|v| v.key.question_id), k, seed)?;
    let results: Vec<Result<(ClassifierModel, Vec<Prediction>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k)
            .map(|fold| {
                let labeled = &labeled;
                let folds = &folds;
                s.spawn(move || {
                    let (test, train): (Vec<&PairFeatureVector>, Vec<&PairFeatureVector>) =
                        labeled.iter().partition(|v| folds[&v.key.question_id] == fold);
                    let train: Vec<PairFeatureVector> = train.into_iter().cloned().collect();
                    let (model, _) = fit(names, &train, cfg)?;
                    let preds = test
                        .iter()
                        .map(|v| Prediction {
                            key: v.key,
                            fold: Some(fold),
                            probability: model.predict_values(&v.values),
                        })
                        .collect();
                    Ok((model, preds))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold worker panicked")).collect()
    });
    let mut models = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(labeled.len());
    for r in results {
        let (m, p) = r?;
        models.push(m);
        predictions.extend(p);
    }
    predictions.sort_by_key(|p| p.key);
    Ok(CvResult {
        models,
        predictions,
        folds,
    })
}

/// Applies a model trained on one language to another language's vectors,
/// with standardization statistics recomputed on the new data.
pub fn transfer_apply(
    model: &ClassifierModel,
    names: &[String],
    data: &[PairFeatureVector],
) -> Result<Vec<Prediction>> {
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let missing: Vec<&str> = model
        .features
        .iter()
        .filter(|f| !index.contains_key(f.as_str()))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompatibleRegistry(format!(
            "target data lacks {}",
            missing.join(", ")
        )));
    }
    let cols: Vec<usize> = model.features.iter().map(|f| index[f.as_str()]).collect();
    let rows: Vec<Vec<f64>> = data
        .iter()
        .map(|v| cols.iter().map(|&c| v.values[c]).collect())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let local = model.with_stats(standardize_columns(&refs, cols.len()));
    let mut out: Vec<Prediction> = data
        .iter()
        .zip(&rows)
        .map(|(v, r)| Prediction {
            key: v.key,
            fold: None,
            probability: local.predict_values(r),
        })
        .collect();
    out.sort_by_key(|c| c.key);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ColumnStats;
    use crate::types::{CandidateKey, Label};
    use proptest::prelude::*;
    use rand::Rng;

    fn fixture(questions: usize, per_q: usize, seed: u64) -> Vec<PairFeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for q in 0..questions {
            for s in 0..per_q {
                let x: f64 = rng.random_range(-1.0..1.0);
                out.push(PairFeatureVector {
                    key: CandidateKey {
                        question_id: 100 + q as u64 * 7,
                        answer_id: 1,
                        block_index: 0,
                        line_start: s + 1,
                        line_end: s + 1,
                    },
                    values: vec![x, rng.random_range(-1.0..1.0)],
                    label: Some(if x + rng.random_range(-0.5..0.5) > 0.3 { Label::Positive } else { Label::Negative }),
                });
            }
        }
        out
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn ten_questions_five_folds() {
        let folds = assign_folds(0..10, 5, 1).unwrap();
        let mut sizes = [0; 5];
        for f in folds.values() {
            sizes[*f] += 1;
        }
        assert_eq!(sizes, [2; 5]);
    }

    #[test]
    fn too_many_folds_is_an_error() {
        assert!(assign_folds(0..3, 5, 1).is_err());
    }

    #[test]
    fn fold_assignment_ignores_input_order() {
        let mut ids: Vec<u64> = (0..30).map(|i| i * 3).collect();
        let a = assign_folds(ids.clone(), 5, 8).unwrap();
        ids.reverse();
        let b = assign_folds(ids, 5, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pooled_predictions_cover_each_pair_once() {
        let data = fixture(12, 6, 2);
        let cv = cross_validate(&names(), &data, 5, &FitConfig::default(), 3).unwrap();
        assert_eq!(cv.predictions.len(), data.len());
        let keys: BTreeSet<_> = cv.predictions.iter().map(|p| p.key).collect();
        assert_eq!(keys.len(), data.len());
        for p in &cv.predictions {
            assert_eq!(Some(cv.folds[&p.key.question_id]), p.fold);
        }
    }

    #[test]
    fn transfer_restandardizes_on_target() {
        let data = fixture(10, 5, 4);
        let (model, _) = fit(&names(), &data, &FitConfig::default()).unwrap();
        // target language with shifted, scaled, reordered columns plus an extra one
        let target: Vec<PairFeatureVector> = data
            .iter()
            .map(|v| PairFeatureVector {
                values: vec![7.0, v.values[1] * 3.0 - 20.0, v.values[0] * 5.0 - 40.0],
                ..v.clone()
            })
            .collect();
        let tnames: Vec<String> = vec!["extra".into(), "b".into(), "a".into()];
        let preds = transfer_apply(&model, &tnames, &target).unwrap();
        let rows: Vec<&[f64]> = data.iter().map(|v| v.values.as_slice()).collect();
        let own = model.with_stats(standardize_columns(&rows, 2));
        for (p, v) in preds.iter().zip(&data) {
            assert!((p.probability - own.predict_values(&v.values)).abs() < 1e-9);
        }
    }

    #[test]
    fn transfer_reports_missing_features() {
        let data = fixture(10, 5, 4);
        let (model, _) = fit(&names(), &data, &FitConfig::default()).unwrap();
        let err = transfer_apply(&model, &["a".to_string()], &data).unwrap_err();
        assert!(err.to_string().contains('b'));
    }

    #[test]
    fn constant_target_column_standardizes_to_zero() {
        let stats = standardize_columns(&[&[3.0][..], &[3.0], &[3.0]], 1);
        assert_eq!(stats[0], ColumnStats { mean: 3.0, std: 0.0 });
        assert_eq!(stats[0].apply(3.0), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn folds_never_leak_questions(questions in 5usize..40, per_q in 1usize..6, seed: u64) {
            let data = fixture(questions, per_q, seed);
            let folds = assign_folds(data.iter().map(|v| v.key.question_id), 5, seed).unwrap();
            for f in 0..5 {
                let test: BTreeSet<u64> = data.iter().filter(|v| folds[&v.key.question_id] == f).map(|v| v.key.question_id).collect();
                let train: BTreeSet<u64> = data.iter().filter(|v| folds[&v.key.question_id] != f).map(|v| v.key.question_id).collect();
                prop_assert!(test.is_disjoint(&train));
                prop_assert!(!test.is_empty());
            }
            let all: BTreeSet<u64> = data.iter().map(|v| v.key.question_id).collect();
            prop_assert_eq!(folds.len(), all.len());
        }

        #[test]
        fn standardized_columns_have_unit_moments(values in prop::collection::vec(-50.0f64..50.0, 2..60)) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let rows: Vec<[f64; 1]> = values.iter().map(|v| [*v]).collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
            let st = standardize_columns(&refs, 1)[0];
            let z: Vec<f64> = values.iter().map(|v| st.apply(*v)).collect();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((std - 1.0).abs() < 1e-6);
        }
    }
}
