use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::QuestionThread;
use crate::types::Language;

pub const FIXED_SET_SIZE: usize = 100;
pub const SAMPLED_SET_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub language: Language,
    pub seed: u64,
    /// Most-viewed questions, by descending view count.
    pub fixed: Vec<u64>,
    /// Weighted draw from the remaining questions, in draw order.
    pub sampled: Vec<u64>,
}

impl SamplingPlan {
    /// Fixed questions first, then sampled ones.
    pub fn order(&self) -> impl Iterator<Item = u64> + '_ {
        self.fixed.iter().chain(&self.sampled).copied()
    }

    pub fn contains(&self, question_id: u64) -> bool {
        self.fixed.contains(&question_id) || self.sampled.contains(&question_id)
    }
}

/// Draws up to `k` ids without replacement, each draw proportional to weight.
///
/// Each item gets the key `u^(1/w)` for uniform `u` and the `k` largest keys
/// win; this is equivalent to `k` sequential proportional draws. Zero-weight
/// items get key 0 and are taken only once positive weights run out.
pub fn weighted_sample(items: &[(u64, f64)], k: usize, rng: &mut impl Rng) -> Vec<u64> {
    let mut keyed: Vec<(f64, u64)> = items
        .iter()
        .map(|&(id, w)| {
            let u: f64 = rng.random();
            // compare ln(key) = ln(u) / w to avoid underflow for small weights
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, id)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Fixed set = top questions by views; sampled set drawn from the rest in
/// proportion to views.
pub fn build_sampling_plan(threads: &[QuestionThread], seed: u64, fixed_n: usize, sample_n: usize) -> SamplingPlan {
    let language = threads
        .first()
        .map(|t| t.language.clone())
        .unwrap_or_else(|| Language::new(""));
    let mut by_views: Vec<(u64, u64)> = threads
        .iter()
        .map(|t| (t.question_id, t.view_count.unwrap_or(0)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    by_views.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if by_views.len() < fixed_n {
        log::warn!(
            "only {} questions; the fixed set takes all of them and nothing is sampled",
            by_views.len()
        );
    }
    let split = fixed_n.min(by_views.len());
    let fixed = by_views[..split].iter().map(|(q, _)| *q).collect();
    let mut rest: Vec<(u64, f64)> = by_views[split..].iter().map(|&(q, v)| (q, v as f64)).collect();
    rest.sort_by_key(|r| r.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampled = weighted_sample(&rest, sample_n, &mut rng);
    SamplingPlan {
        language,
        seed,
        fixed,
        sampled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn threads(views: &[u64]) -> Vec<QuestionThread> {
        views
            .iter()
            .enumerate()
            .map(|(i, v)| QuestionThread {
                question_id: i as u64 + 1,
                title: format!("How to do {i}"),
                language: Language::new("python"),
                view_count: Some(*v),
                answers: Vec::new(),
            })
            .collect()
    }

    #[test]
    fn degenerate_weights_pick_the_only_positive() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(weighted_sample(&[(1, 100.0), (2, 0.0), (3, 0.0)], 1, &mut rng), vec![1]);
        }
    }

    #[test]
    fn equal_weights_are_uniform() {
        let items = [(1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0)];
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 10_000;
        for _ in 0..trials {
            for id in weighted_sample(&items, 2, &mut rng) {
                counts[id as usize - 1] += 1;
            }
        }
        // each id is drawn with probability 1/2: mean 5000, sd 50
        for c in counts {
            assert!((c as f64 - 5000.0).abs() <= 150.0, "{counts:?}");
        }
    }

    #[test]
    fn first_draw_is_proportional() {
        let items = [(1, 1.0), (2, 3.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 20_000;
        let first = (0..n)
            .filter(|_| weighted_sample(&items, 1, &mut rng) == vec![2])
            .count();
        // p = 0.75, sd ≈ 0.0031
        assert!((first as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn plan_is_deterministic_and_disjoint() {
        let views: Vec<u64> = (0..300).map(|i| (i * 37 % 101) as u64).collect();
        let t = threads(&views);
        let a = build_sampling_plan(&t, 5, 100, 50);
        let b = build_sampling_plan(&t, 5, 100, 50);
        assert_eq!(a, b);
        assert_eq!(a.fixed.len(), 100);
        assert_eq!(a.sampled.len(), 50);
        let fixed: BTreeSet<u64> = a.fixed.iter().copied().collect();
        assert!(a.sampled.iter().all(|q| !fixed.contains(q)));
        assert_ne!(build_sampling_plan(&t, 6, 100, 50).sampled, a.sampled);
    }

    #[test]
    fn fixed_set_is_top_by_views() {
        let t = threads(&[5, 50, 1, 500]);
        let plan = build_sampling_plan(&t, 1, 2, 10);
        assert_eq!(plan.fixed, vec![4, 2]);
        assert_eq!(plan.sampled.len(), 2);
    }

    #[test]
    fn small_corpus_is_all_fixed() {
        let plan = build_sampling_plan(&threads(&[100, 0, 0]), 1, 100, 1000);
        assert_eq!(plan.fixed, vec![1, 2, 3]);
        assert!(plan.sampled.is_empty());
    }
}
