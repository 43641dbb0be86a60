//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snipmine::classifier::PairFeatureVector;
use snipmine::corr::{CellKind, Direction, EncDecModel, ModelDims, Params, Vocabulary};
use snipmine::{CandidateKey, Label};

pub fn code_lines(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("value_{i} = compute(value_{}, {i})", i.saturating_sub(1))).collect()
}

pub fn key(i: usize) -> CandidateKey {
    CandidateKey {
        question_id: (i / 10) as u64,
        answer_id: 1,
        block_index: 0,
        line_start: 1,
        line_end: i % 10 + 1,
    }
}

/// A randomly initialized model over `vocab` source and target tokens.
pub fn model(vocab: usize, embed: usize, hidden: usize) -> EncDecModel {
    let v = |p: &str| Vocabulary::build(&[(0..vocab - 4).map(|i| format!("{p}{i}")).collect()], 1);
    let (src, tgt) = (v("s"), v("t"));
    let dims = ModelDims {
        src_vocab: src.len(),
        tgt_vocab: tgt.len(),
        embed,
        hidden,
        cell: CellKind::Gated,
    };
    let params = Params::uniform(&dims, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
    EncDecModel::new(Direction::IntentToSnippet, src, tgt, embed, hidden, CellKind::Gated, params)
}

/// Labeled feature vectors with a noisy linear decision rule.
pub fn vectors(n: usize, width: usize) -> Vec<PairFeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..n)
        .map(|i| {
            let values: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s: f64 = values.iter().enumerate().map(|(j, v)| v * (j as f64 - 3.0)).sum::<f64>() + rng.random_range(-1.0..1.0);
            PairFeatureVector {
                key: key(i),
                values,
                label: Some(if s > 2.0 { Label::Positive } else { Label::Negative }),
            }
        })
        .collect()
}
