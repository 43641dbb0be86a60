use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{CellKind, Direction, DropoutMasks, EncDecModel, ModelDims, Params};
use super::tokenize::{tokenize_code, tokenize_nl};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::ingest::CorpusPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub cell: CellKind,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Hard cap on optimizer updates, if set.
    pub max_steps: Option<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub init_scale: f64,
    pub min_freq: usize,
    pub max_intent_tokens: usize,
    pub max_code_tokens: usize,
    pub seed: u64,
    /// Worker threads for gradient accumulation. Chunked summation can change
    /// the last bits of the result, so reruns should keep this fixed.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 256,
            hidden_dim: 512,
            cell: CellKind::Gated,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            max_steps: None,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            dropout: 0.5,
            recurrent_dropout: 0.2,
            init_scale: 0.1,
            min_freq: 2,
            max_intent_tokens: 40,
            max_code_tokens: 120,
            seed: 1,
            jobs: 1,
        }
    }
}

/// A tokenized training pair, oriented by direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

pub fn intent_tokens(intent: &str, cfg: &TrainConfig) -> Vec<String> {
    let mut t = tokenize_nl(intent);
    t.truncate(cfg.max_intent_tokens);
    t
}

pub fn code_tokens(code: &str, cfg: &TrainConfig) -> Vec<String> {
    let mut t = tokenize_code(code);
    t.truncate(cfg.max_code_tokens);
    t
}

pub fn orient(direction: Direction, intent: Vec<String>, code: Vec<String>) -> TokenPair {
    match direction {
        Direction::IntentToSnippet => TokenPair {
            source: intent,
            target: code,
        },
        Direction::SnippetToIntent => TokenPair {
            source: code,
            target: intent,
        },
    }
}

/// Tokenizes and truncates a corpus. Pairs with an empty side are dropped.
pub fn prepare_pairs(corpus: &[CorpusPair], direction: Direction, cfg: &TrainConfig) -> Vec<TokenPair> {
    corpus
        .iter()
        .map(|p| (intent_tokens(&p.intent, cfg), code_tokens(&p.code, cfg)))
        .filter(|(i, c)| !i.is_empty() && !c.is_empty())
        .map(|(i, c)| orient(direction, i, c))
        .collect()
}

/// Train/validation sizes for `n` pairs: train = floor(9n/10).
pub fn split_sizes(n: usize) -> (usize, usize) {
    let train = 9 * n / 10;
    (train, n - train)
}

/// Seeded 9:1 split of pair indices.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, _) = split_sizes(n);
    let val = idx.split_off(train);
    (idx, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    /// Mean per-token NLL over training batches, with dropout.
    pub train_nll: f64,
    pub val_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub initial_val_log_likelihood: f64,
    /// Epoch of the selected checkpoint; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_val_log_likelihood: f64,
    pub steps: usize,
    pub epochs: Vec<EpochLog>,
    pub stopped_early: bool,
}

struct Encoded {
    src: Vec<usize>,
    tgt: Vec<usize>,
}

impl Encoded {
    fn tokens(&self) -> usize {
        self.tgt.len() + 1
    }
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn new(dims: &ModelDims) -> Self {
        Adam {
            m: Params::zeros(dims),
            v: Params::zeros(dims),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Params, grads: &Params, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
                v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
                let mhat = m.data[i] / c1;
                let vhat = v.data[i] / c2;
                p.data[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

fn add_into(acc: &mut Params, other: &Params) {
    for (a, b) in acc.tensors_mut().into_iter().zip(other.tensors()) {
        for (x, y) in a.data.iter_mut().zip(&b.data) {
            *x += y;
        }
    }
}

/// Mean per-token log-likelihood of `data` under `model`, no dropout.
fn mean_log_likelihood(model: &EncDecModel, data: &[Encoded], jobs: usize) -> Result<f64> {
    let tokens: usize = data.iter().map(Encoded::tokens).sum();
    let chunk = data.len().div_ceil(jobs.max(1)).max(1);
    let parts: Vec<Result<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = data
            .chunks(chunk)
            .map(|c| {
                s.spawn(move || {
                    c.iter()
                        .map(|e| model.sequence_log_prob_ids(&e.src, &e.tgt))
                        .sum::<Result<f64>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scoring worker panicked")).collect()
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total / tokens as f64)
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct Trained {
    /// Checkpoint with the highest validation likelihood, initial parameters included.
    pub model: EncDecModel,
    /// Parameters after the last update.
    pub last: EncDecModel,
    pub report: TrainReport,
    /// Indices into the input pairs used for training.
    pub train_indices: Vec<usize>,
}

/// Trains one direction and returns the best-validation checkpoint.
pub fn train(pairs: &[TokenPair], direction: Direction, cfg: &TrainConfig) -> Result<(EncDecModel, TrainReport)> {
    let t = train_full(pairs, direction, cfg)?;
    Ok((t.model, t.report))
}

pub fn train_full(pairs: &[TokenPair], direction: Direction, cfg: &TrainConfig) -> Result<Trained> {
    if pairs.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 training pairs, got {}", pairs.len())));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let (train_idx, val_idx) = split_indices(pairs.len(), cfg.seed);
    if val_idx.is_empty() {
        return Err(Error::Invalid("validation split is empty".into()));
    }
    let sources: Vec<Vec<String>> = train_idx.iter().map(|&i| pairs[i].source.clone()).collect();
    let targets: Vec<Vec<String>> = train_idx.iter().map(|&i| pairs[i].target.clone()).collect();
    let src_vocab = Vocabulary::build(&sources, cfg.min_freq);
    let tgt_vocab = Vocabulary::build(&targets, cfg.min_freq);
    let encode = |idx: &[usize]| -> Vec<Encoded> {
        idx.iter()
            .map(|&i| Encoded {
                src: src_vocab.encode(&pairs[i].source),
                tgt: tgt_vocab.encode(&pairs[i].target),
            })
            .collect()
    };
    let train_set = encode(&train_idx);
    let val_set = encode(&val_idx);
    if train_set.iter().chain(&val_set).any(|e| e.src.is_empty()) {
        return Err(Error::Invalid("pair with empty source sequence".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = ModelDims {
        src_vocab: src_vocab.len(),
        tgt_vocab: tgt_vocab.len(),
        embed: cfg.embed_dim,
        hidden: cfg.hidden_dim,
        cell: cfg.cell,
    };
    let params = Params::uniform(&dims, cfg.init_scale, &mut rng);
    let mut model = EncDecModel::new(direction, src_vocab, tgt_vocab, cfg.embed_dim, cfg.hidden_dim, cfg.cell, params);
    model.meta.seed = cfg.seed;
    model.meta.max_intent_tokens = cfg.max_intent_tokens;
    model.meta.max_code_tokens = cfg.max_code_tokens;

    let jobs = cfg.jobs.max(1);
    let initial = mean_log_likelihood(&model, &val_set, jobs)?;
    let mut best = model.clone();
    best.meta.val_log_likelihood = Some(initial);
    let mut report = TrainReport {
        train_pairs: train_set.len(),
        val_pairs: val_set.len(),
        initial_val_log_likelihood: initial,
        best_epoch: 0,
        best_val_log_likelihood: initial,
        steps: 0,
        epochs: Vec::new(),
        stopped_early: false,
    };

    let mut adam = Adam::new(&dims);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut since_best = 0;
    'epochs: for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_nll = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| report.steps >= m) {
                break;
            }
            let batch_tokens: usize = batch.iter().map(|&i| train_set[i].tokens()).sum();
            let scale = 1.0 / batch_tokens as f64;
            // masks are drawn up front so results do not depend on `jobs`
            let masks: Vec<DropoutMasks> = batch
                .iter()
                .map(|&i| {
                    DropoutMasks::sample(
                        &mut rng,
                        cfg.hidden_dim,
                        train_set[i].tokens(),
                        cfg.dropout,
                        cfg.recurrent_dropout,
                    )
                })
                .collect();
            let items: Vec<(usize, &DropoutMasks)> = batch.iter().copied().zip(&masks).collect();
            let chunk = items.len().div_ceil(jobs);
            let model_ref = &model;
            let train_ref = &train_set;
            let parts: Vec<Result<(Params, f64)>> = std::thread::scope(|s| {
                let handles: Vec<_> = items
                    .chunks(chunk)
                    .map(|c| {
                        s.spawn(move || {
                            let mut g = Params::zeros(&model_ref.dims);
                            let mut lp = 0.0;
                            for (i, m) in c {
                                let e = &train_ref[*i];
                                lp += model_ref.accumulate_gradients(&e.src, &e.tgt, m, scale, &mut g)?;
                            }
                            Ok((g, lp))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("training worker panicked")).collect()
            });
            let mut grads: Option<Params> = None;
            let mut batch_lp = 0.0;
            for part in parts {
                let (g, lp) = part?;
                batch_lp += lp;
                match grads.as_mut() {
                    Some(acc) => add_into(acc, &g),
                    None => grads = Some(g),
                }
            }
            let grads = grads.expect("non-empty batch");
            report.steps += 1;
            if !batch_lp.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged { step: report.steps });
            }
            adam.step(&mut model.params, &grads, cfg);
            if !model.params.all_finite() {
                return Err(Error::Diverged { step: report.steps });
            }
            epoch_nll -= batch_lp;
            epoch_tokens += batch_tokens;
        }
        if epoch_tokens == 0 {
            break;
        }
        let val = mean_log_likelihood(&model, &val_set, jobs)?;
        if !val.is_finite() {
            return Err(Error::Diverged { step: report.steps });
        }
        report.epochs.push(EpochLog {
            epoch,
            steps: report.steps,
            train_nll: epoch_nll / epoch_tokens as f64,
            val_log_likelihood: val,
        });
        log::info!(
            "{} epoch {epoch}: train nll {:.4}, val ll {val:.4}",
            direction.as_str(),
            epoch_nll / epoch_tokens as f64
        );
        if val > report.best_val_log_likelihood {
            report.best_val_log_likelihood = val;
            report.best_epoch = epoch;
            best = model.clone();
            best.meta.val_log_likelihood = Some(val);
            best.meta.steps = report.steps;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                report.stopped_early = true;
                break 'epochs;
            }
        }
    }
    model.meta.steps = report.steps;
    model.meta.val_log_likelihood = report.epochs.last().map(|e| e.val_log_likelihood).or(Some(initial));
    Ok(Trained {
        model: best,
        last: model,
        report,
        train_indices: train_idx,
    })
}

/// Mean per-token negative log-likelihood of token pairs under a model.
pub fn mean_nll(model: &EncDecModel, pairs: &[TokenPair]) -> Result<f64> {
    let data: Vec<Encoded> = pairs
        .iter()
        .map(|p| Encoded {
            src: model.src_vocab.encode(&p.source),
            tgt: model.tgt_vocab.encode(&p.target),
        })
        .collect();
    Ok(-mean_log_likelihood(model, &data, 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copy_pairs(n: usize, seed: u64) -> Vec<TokenPair> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let len = rng.random_range(2..5);
                let toks: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..6))).collect();
                TokenPair {
                    source: toks.clone(),
                    target: toks,
                }
            })
            .collect()
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            embed_dim: 8,
            hidden_dim: 16,
            max_epochs: 3,
            min_freq: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        assert_eq!(split_sizes(33_946), (30_551, 3_395));
        assert_eq!(split_sizes(37_882), (34_093, 3_789));
        assert_eq!(split_sizes(2), (1, 1));
        assert_eq!(split_sizes(10), (9, 1));
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let (a, b) = split_indices(100, 4);
        let (c, d) = split_indices(100, 4);
        assert_eq!((&a, &b), (&c, &d));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_ne!(split_indices(100, 5).1, b);
    }

    #[test]
    fn too_few_pairs_is_an_error() {
        let pairs = copy_pairs(1, 1);
        assert!(train(&pairs, Direction::IntentToSnippet, &tiny()).is_err());
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let pairs = copy_pairs(20, 2);
        let (a, ra) = train(&pairs, Direction::IntentToSnippet, &tiny()).unwrap();
        let (b, rb) = train(&pairs, Direction::IntentToSnippet, &tiny()).unwrap();
        assert_eq!(ra.best_val_log_likelihood.to_bits(), rb.best_val_log_likelihood.to_bits());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn jobs_do_not_change_results() {
        let pairs = copy_pairs(20, 2);
        let one = train(&pairs, Direction::IntentToSnippet, &tiny()).unwrap().1;
        let cfg = TrainConfig { jobs: 3, ..tiny() };
        let three = train(&pairs, Direction::IntentToSnippet, &cfg).unwrap().1;
        // chunked summation may differ in the last bits only
        assert!((one.best_val_log_likelihood - three.best_val_log_likelihood).abs() < 1e-9);
    }

    #[test]
    fn selected_checkpoint_never_worse_than_initial() {
        let pairs = copy_pairs(20, 3);
        let (model, report) = train(&pairs, Direction::SnippetToIntent, &tiny()).unwrap();
        assert!(report.best_val_log_likelihood >= report.initial_val_log_likelihood);
        assert_eq!(model.meta.val_log_likelihood, Some(report.best_val_log_likelihood));
    }

    #[test]
    fn max_steps_caps_updates() {
        let pairs = copy_pairs(40, 3);
        let cfg = TrainConfig {
            batch_size: 4,
            max_steps: Some(5),
            ..tiny()
        };
        let (_, report) = train(&pairs, Direction::IntentToSnippet, &cfg).unwrap();
        assert_eq!(report.steps, 5);
    }

    #[test]
    fn huge_learning_rate_reports_divergence_or_survives() {
        let pairs = copy_pairs(20, 3);
        let cfg = TrainConfig {
            learning_rate: 1e300,
            ..tiny()
        };
        match train(&pairs, Direction::IntentToSnippet, &cfg) {
            Err(Error::Diverged { step }) => assert!(step >= 1),
            Err(e) => panic!("unexpected error {e}"),
            Ok((m, _)) => assert!(m.params.all_finite()),
        }
    }

    #[test]
    fn prepare_truncates_and_orients() {
        let corpus = vec![CorpusPair {
            intent: "How to sort a list".into(),
            code: "xs.sort()".into(),
            question_id: 1,
        }];
        let cfg = TrainConfig {
            max_intent_tokens: 2,
            ..TrainConfig::default()
        };
        let s2i = prepare_pairs(&corpus, Direction::SnippetToIntent, &cfg);
        assert_eq!(s2i[0].target, vec!["how", "to"]);
        assert_eq!(s2i[0].source, vec!["xs", ".", "sort", "(", ")"]);
        let i2s = prepare_pairs(&corpus, Direction::IntentToSnippet, &cfg);
        assert_eq!(i2s[0].source, s2i[0].target);
    }
}
