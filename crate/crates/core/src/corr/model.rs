//! Attentional encoder-decoder over token ids.
//!
//! The encoder is a single-layer recurrent network over source embeddings.
//! The decoder starts from the last encoder state, attends over all encoder
//! states with additive attention `vᵀ tanh(W_dec s + W_src h)`, and predicts
//! the next token from `[s; context]` through a softmax output layer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, sigmoid, softmax, Tensor};
use super::vocab::{Vocabulary, BOS, EOS};
use crate::error::{Error, Result};

/// Per-step probability floor, as a log value.
pub const LOG_FLOOR: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Scores the snippet given the intent, log P(S | I).
    #[serde(rename = "i2s")]
    IntentToSnippet,
    /// Scores the intent given the snippet, log P(I | S).
    #[serde(rename = "s2i")]
    SnippetToIntent,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::IntentToSnippet => "i2s",
            Direction::SnippetToIntent => "s2i",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "i2s" => Some(Direction::IntentToSnippet),
            "s2i" => Some(Direction::SnippetToIntent),
            _ => None,
        }
    }
}

/// Recurrence used by both encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Gated recurrent unit.
    Gated,
    /// Plain `h' = tanh(W e + U h + b)` recurrence.
    Tanh,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Gated => 3,
            CellKind::Tanh => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub cell: CellKind,
}

/// Every trainable tensor. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub src_embed: Tensor,
    pub tgt_embed: Tensor,
    pub enc_w: Tensor,
    pub enc_u: Tensor,
    pub enc_b: Tensor,
    pub dec_w: Tensor,
    pub dec_u: Tensor,
    pub dec_b: Tensor,
    pub att_src: Tensor,
    pub att_dec: Tensor,
    pub att_v: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub const PARAM_NAMES: [&str; 13] = [
    "src_embed", "tgt_embed", "enc_w", "enc_u", "enc_b", "dec_w", "dec_u", "dec_b", "att_src",
    "att_dec", "att_v", "out_w", "out_b",
];

impl Params {
    pub fn zeros(d: &ModelDims) -> Self {
        let g = d.cell.gates() * d.hidden;
        Params {
            src_embed: Tensor::zeros(d.src_vocab, d.embed),
            tgt_embed: Tensor::zeros(d.tgt_vocab, d.embed),
            enc_w: Tensor::zeros(g, d.embed),
            enc_u: Tensor::zeros(g, d.hidden),
            enc_b: Tensor::zeros(g, 1),
            dec_w: Tensor::zeros(g, d.embed),
            dec_u: Tensor::zeros(g, d.hidden),
            dec_b: Tensor::zeros(g, 1),
            att_src: Tensor::zeros(d.hidden, d.hidden),
            att_dec: Tensor::zeros(d.hidden, d.hidden),
            att_v: Tensor::zeros(d.hidden, 1),
            out_w: Tensor::zeros(d.tgt_vocab, 2 * d.hidden),
            out_b: Tensor::zeros(d.tgt_vocab, 1),
        }
    }

    pub fn uniform<R: Rng>(d: &ModelDims, scale: f64, rng: &mut R) -> Self {
        let mut p = Params::zeros(d);
        for t in p.tensors_mut() {
            *t = Tensor::uniform(t.rows, t.cols, scale, rng);
        }
        p
    }

    pub fn tensors(&self) -> [&Tensor; 13] {
        [
            &self.src_embed,
            &self.tgt_embed,
            &self.enc_w,
            &self.enc_u,
            &self.enc_b,
            &self.dec_w,
            &self.dec_u,
            &self.dec_b,
            &self.att_src,
            &self.att_dec,
            &self.att_v,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 13] {
        [
            &mut self.src_embed,
            &mut self.tgt_embed,
            &mut self.enc_w,
            &mut self.enc_u,
            &mut self.enc_b,
            &mut self.dec_w,
            &mut self.dec_u,
            &mut self.dec_b,
            &mut self.att_src,
            &mut self.att_dec,
            &mut self.att_v,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub steps: usize,
    /// Mean per-token log-likelihood on the validation split.
    pub val_log_likelihood: Option<f64>,
    pub max_intent_tokens: usize,
    pub max_code_tokens: usize,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        TrainingMeta {
            seed: 0,
            steps: 0,
            val_log_likelihood: None,
            max_intent_tokens: 40,
            max_code_tokens: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncDecModel {
    pub direction: Direction,
    pub dims: ModelDims,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub params: Params,
    pub meta: TrainingMeta,
}

/// Encoder states for one source sequence, plus their attention projections.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    pub states: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
}

/// Result of one decoder step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub probs: Vec<f64>,
    pub attention: Vec<f64>,
    pub state: Vec<f64>,
}

/// Dropout masks for one training example, already scaled by 1/(1-p).
#[derive(Debug, Clone, Default)]
pub struct DropoutMasks {
    pub encoder: Option<Vec<f64>>,
    pub decoder: Option<Vec<f64>>,
    /// One mask per decoder step over `[s; context]`.
    pub output: Option<Vec<Vec<f64>>>,
}

fn bernoulli_mask(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 - p;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

impl DropoutMasks {
    pub fn sample(
        rng: &mut ChaCha8Rng,
        hidden: usize,
        target_steps: usize,
        output_p: f64,
        recurrent_p: f64,
    ) -> Self {
        let recurrent = |rng: &mut ChaCha8Rng| (recurrent_p > 0.0).then(|| bernoulli_mask(rng, hidden, recurrent_p));
        let encoder = recurrent(rng);
        let decoder = recurrent(rng);
        let output = (output_p > 0.0).then(|| {
            (0..target_steps)
                .map(|_| bernoulli_mask(rng, 2 * hidden, output_p))
                .collect()
        });
        DropoutMasks {
            encoder,
            decoder,
            output,
        }
    }
}

struct CellRef<'a> {
    kind: CellKind,
    w: &'a Tensor,
    u: &'a Tensor,
    b: &'a Tensor,
}

struct CellGrad<'a> {
    w: &'a mut Tensor,
    u: &'a mut Tensor,
    b: &'a mut Tensor,
}

/// Intermediate values of one recurrence step.
#[derive(Debug, Clone)]
struct CellCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    h_in: Vec<f64>,
    /// gated: [r, z, n]; tanh: [h_out]
    acts: Vec<f64>,
    /// gated only: U_n · h_in
    un_h: Vec<f64>,
    h_out: Vec<f64>,
}

impl CellRef<'_> {
    fn forward(&self, x: &[f64], h_prev: &[f64], mask: Option<&[f64]>) -> CellCache {
        let h = h_prev.len();
        let h_in: Vec<f64> = match mask {
            Some(m) => h_prev.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h_prev.to_vec(),
        };
        match self.kind {
            CellKind::Tanh => {
                let mut pre = self.b.data.clone();
                self.w.matvec_add(x, &mut pre);
                self.u.matvec_add(&h_in, &mut pre);
                let out: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
                CellCache {
                    x: x.to_vec(),
                    h_prev: h_prev.to_vec(),
                    h_in,
                    acts: out.clone(),
                    un_h: Vec::new(),
                    h_out: out,
                }
            }
            CellKind::Gated => {
                // rows [0,h): reset, [h,2h): update, [2h,3h): candidate
                let mut pre = self.b.data.clone();
                self.w.matvec_add(x, &mut pre);
                self.u.matvec_rows_add(0..2 * h, &h_in, &mut pre[..2 * h]);
                let mut un_h = vec![0.0; h];
                self.u.matvec_rows_add(2 * h..3 * h, &h_in, &mut un_h);
                let mut acts = vec![0.0; 3 * h];
                for i in 0..2 * h {
                    acts[i] = sigmoid(pre[i]);
                }
                for i in 0..h {
                    acts[2 * h + i] = (pre[2 * h + i] + acts[i] * un_h[i]).tanh();
                }
                let h_out = (0..h)
                    .map(|i| {
                        let z = acts[h + i];
                        (1.0 - z) * acts[2 * h + i] + z * h_prev[i]
                    })
                    .collect();
                CellCache {
                    x: x.to_vec(),
                    h_prev: h_prev.to_vec(),
                    h_in,
                    acts,
                    un_h,
                    h_out,
                }
            }
        }
    }

    /// Accumulates parameter gradients and returns (dx, dh_prev).
    fn backward(
        &self,
        cache: &CellCache,
        dh_out: &[f64],
        mask: Option<&[f64]>,
        grad: &mut CellGrad<'_>,
    ) -> (Vec<f64>, Vec<f64>) {
        let h = dh_out.len();
        let mut dx = vec![0.0; cache.x.len()];
        let mut dh_in = vec![0.0; h];
        let mut dh_prev = vec![0.0; h];
        match self.kind {
            CellKind::Tanh => {
                let da: Vec<f64> = dh_out
                    .iter()
                    .zip(&cache.acts)
                    .map(|(d, o)| d * (1.0 - o * o))
                    .collect();
                grad.w.outer_add(&da, &cache.x);
                grad.u.outer_add(&da, &cache.h_in);
                axpy(1.0, &da, &mut grad.b.data);
                self.w.matvec_t_add(&da, &mut dx);
                self.u.matvec_t_add(&da, &mut dh_in);
            }
            CellKind::Gated => {
                let acts = &cache.acts;
                // pre-activation gradients for the W/b path and the U path
                let mut d_wx = vec![0.0; 3 * h];
                let mut d_uh = vec![0.0; 3 * h];
                for i in 0..h {
                    let (r, z, n) = (acts[i], acts[h + i], acts[2 * h + i]);
                    let dn = dh_out[i] * (1.0 - z);
                    let dz = dh_out[i] * (cache.h_prev[i] - n);
                    dh_prev[i] += dh_out[i] * z;
                    let da_n = dn * (1.0 - n * n);
                    let dr = da_n * cache.un_h[i];
                    let dg = da_n * r;
                    let da_r = dr * r * (1.0 - r);
                    let da_z = dz * z * (1.0 - z);
                    d_wx[i] = da_r;
                    d_wx[h + i] = da_z;
                    d_wx[2 * h + i] = da_n;
                    d_uh[i] = da_r;
                    d_uh[h + i] = da_z;
                    d_uh[2 * h + i] = dg;
                }
                grad.w.outer_add(&d_wx, &cache.x);
                grad.u.outer_add(&d_uh, &cache.h_in);
                axpy(1.0, &d_wx, &mut grad.b.data);
                self.w.matvec_t_add(&d_wx, &mut dx);
                self.u.matvec_t_add(&d_uh, &mut dh_in);
            }
        }
        match mask {
            Some(m) => {
                for i in 0..h {
                    dh_prev[i] += dh_in[i] * m[i];
                }
            }
            None => axpy(1.0, &dh_in, &mut dh_prev),
        }
        (dx, dh_prev)
    }
}

/// Cached values of one decoder step for backpropagation.
struct StepCache {
    cell: CellCache,
    /// tanh(W_dec s + W_src h_j) per source position
    att_hidden: Vec<Vec<f64>>,
    attention: Vec<f64>,
    /// `[s; context]` after dropout
    output_in: Vec<f64>,
    probs: Vec<f64>,
    target: usize,
    floored: bool,
}

struct ForwardCache {
    encoder: Vec<CellCache>,
    encoded: EncodedSource,
    steps: Vec<StepCache>,
    log_prob: f64,
}

impl EncDecModel {
    pub fn new(
        direction: Direction,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        embed: usize,
        hidden: usize,
        cell: CellKind,
        params: Params,
    ) -> Self {
        let dims = ModelDims {
            src_vocab: src_vocab.len(),
            tgt_vocab: tgt_vocab.len(),
            embed,
            hidden,
            cell,
        };
        EncDecModel {
            direction,
            dims,
            src_vocab,
            tgt_vocab,
            params,
            meta: TrainingMeta::default(),
        }
    }

    fn encoder_cell(&self) -> CellRef<'_> {
        CellRef {
            kind: self.dims.cell,
            w: &self.params.enc_w,
            u: &self.params.enc_u,
            b: &self.params.enc_b,
        }
    }

    fn decoder_cell(&self) -> CellRef<'_> {
        CellRef {
            kind: self.dims.cell,
            w: &self.params.dec_w,
            u: &self.params.dec_u,
            b: &self.params.dec_b,
        }
    }

    fn run_encoder(&self, src: &[usize], mask: Option<&[f64]>) -> Result<(Vec<CellCache>, EncodedSource)> {
        if src.is_empty() {
            return Err(Error::Invalid("empty source sequence".into()));
        }
        let cell = self.encoder_cell();
        let mut h = vec![0.0; self.dims.hidden];
        let mut caches = Vec::with_capacity(src.len());
        for &tok in src {
            let cache = cell.forward(self.params.src_embed.row(tok), &h, mask);
            h = cache.h_out.clone();
            caches.push(cache);
        }
        let states: Vec<Vec<f64>> = caches.iter().map(|c| c.h_out.clone()).collect();
        let keys = states
            .iter()
            .map(|s| {
                let mut k = vec![0.0; self.dims.hidden];
                self.params.att_src.matvec_add(s, &mut k);
                k
            })
            .collect();
        Ok((caches, EncodedSource { states, keys }))
    }

    /// Runs the encoder over source token ids.
    pub fn encode(&self, src: &[usize]) -> Result<EncodedSource> {
        Ok(self.run_encoder(src, None)?.1)
    }

    /// Attention weights, context vector and per-position hidden activations.
    fn attend(&self, enc: &EncodedSource, state: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let hdim = self.dims.hidden;
        let mut q = vec![0.0; hdim];
        self.params.att_dec.matvec_add(state, &mut q);
        let att_hidden: Vec<Vec<f64>> = enc
            .keys
            .iter()
            .map(|k| k.iter().zip(&q).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let scores: Vec<f64> = att_hidden.iter().map(|u| dot(&self.params.att_v.data, u)).collect();
        let attention = softmax(&scores);
        let mut context = vec![0.0; hdim];
        for (a, h) in attention.iter().zip(&enc.states) {
            axpy(*a, h, &mut context);
        }
        (attention, context, att_hidden)
    }

    fn output_probs(&self, output_in: &[f64]) -> Vec<f64> {
        let mut logits = self.params.out_b.data.clone();
        self.params.out_w.matvec_add(output_in, &mut logits);
        softmax(&logits)
    }

    /// Advances the decoder by one token and returns the next-token distribution.
    pub fn decode_step(&self, enc: &EncodedSource, state: &[f64], prev_token: usize) -> StepOutput {
        let cache = self
            .decoder_cell()
            .forward(self.params.tgt_embed.row(prev_token), state, None);
        let (attention, context, _) = self.attend(enc, &cache.h_out);
        let mut output_in = cache.h_out.clone();
        output_in.extend_from_slice(&context);
        StepOutput {
            probs: self.output_probs(&output_in),
            attention,
            state: cache.h_out,
        }
    }

    pub fn initial_state(&self, enc: &EncodedSource) -> Vec<f64> {
        enc.states.last().cloned().unwrap_or_else(|| vec![0.0; self.dims.hidden])
    }

    /// Distribution over the next target token after `prev_tokens`,
    /// recomputed from the start of the target.
    pub fn step_decode(&self, enc: &EncodedSource, prev_tokens: &[usize]) -> StepOutput {
        let mut state = self.initial_state(enc);
        let mut out = self.decode_step(enc, &state, BOS);
        for &tok in prev_tokens {
            state = out.state.clone();
            out = self.decode_step(enc, &state, tok);
        }
        out
    }

    /// log P(target | source) with teacher forcing, including the end token.
    pub fn sequence_log_prob_ids(&self, src: &[usize], tgt: &[usize]) -> Result<f64> {
        let enc = self.encode(src)?;
        let mut state = self.initial_state(&enc);
        let mut prev = BOS;
        let mut total = 0.0;
        for &next in tgt.iter().chain(std::iter::once(&EOS)) {
            let out = self.decode_step(&enc, &state, prev);
            total += out.probs[next].ln().max(LOG_FLOOR);
            state = out.state;
            prev = next;
        }
        Ok(total)
    }

    pub fn sequence_log_prob(&self, src: &[String], tgt: &[String]) -> Result<f64> {
        self.sequence_log_prob_ids(&self.src_vocab.encode(src), &self.tgt_vocab.encode(tgt))
    }

    fn forward_cached(&self, src: &[usize], tgt: &[usize], masks: &DropoutMasks) -> Result<ForwardCache> {
        let (encoder, encoded) = self.run_encoder(src, masks.encoder.as_deref())?;
        let cell = self.decoder_cell();
        let mut state = self.initial_state(&encoded);
        let mut prev = BOS;
        let mut steps = Vec::with_capacity(tgt.len() + 1);
        let mut log_prob = 0.0;
        for (t, &next) in tgt.iter().chain(std::iter::once(&EOS)).enumerate() {
            let cache = cell.forward(self.params.tgt_embed.row(prev), &state, masks.decoder.as_deref());
            let (attention, context, att_hidden) = self.attend(&encoded, &cache.h_out);
            let mut output_in = cache.h_out.clone();
            output_in.extend_from_slice(&context);
            if let Some(m) = masks.output.as_ref().and_then(|m| m.get(t)) {
                output_in.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
            }
            let probs = self.output_probs(&output_in);
            let raw = probs[next].ln();
            let floored = raw.is_nan() || raw <= LOG_FLOOR;
            log_prob += if floored { LOG_FLOOR } else { raw };
            state = cache.h_out.clone();
            prev = next;
            steps.push(StepCache {
                cell: cache,
                att_hidden,
                attention,
                output_in,
                probs,
                target: next,
                floored,
            });
        }
        Ok(ForwardCache {
            encoder,
            encoded,
            steps,
            log_prob,
        })
    }

    /// Adds `scale · ∂(−log P(tgt|src))/∂θ` to `grads` and returns log P(tgt|src).
    pub fn accumulate_gradients(
        &self,
        src: &[usize],
        tgt: &[usize],
        masks: &DropoutMasks,
        scale: f64,
        grads: &mut Params,
    ) -> Result<f64> {
        let fwd = self.forward_cached(src, tgt, masks)?;
        let hdim = self.dims.hidden;
        let p = &self.params;
        let n_src = fwd.encoded.states.len();
        let mut d_states = vec![vec![0.0; hdim]; n_src];
        let mut d_keys = vec![vec![0.0; hdim]; n_src];
        let mut ds_next = vec![0.0; hdim];

        let dec_cell = self.decoder_cell();
        for (t, step) in fwd.steps.iter().enumerate().rev() {
            // output layer
            let mut d_out = vec![0.0; 2 * hdim];
            if !step.floored {
                let mut dlogits = step.probs.clone();
                dlogits[step.target] -= 1.0;
                dlogits.iter_mut().for_each(|v| *v *= scale);
                grads.out_w.outer_add(&dlogits, &step.output_in);
                axpy(1.0, &dlogits, &mut grads.out_b.data);
                p.out_w.matvec_t_add(&dlogits, &mut d_out);
                if let Some(m) = masks.output.as_ref().and_then(|m| m.get(t)) {
                    d_out.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                }
            }
            let mut ds = ds_next.clone();
            axpy(1.0, &d_out[..hdim], &mut ds);
            let d_ctx = &d_out[hdim..];

            // attention
            let d_att: Vec<f64> = fwd.encoded.states.iter().map(|h| dot(h, d_ctx)).collect();
            let mean: f64 = step.attention.iter().zip(&d_att).map(|(a, d)| a * d).sum();
            let mut dq = vec![0.0; hdim];
            for j in 0..n_src {
                let a = step.attention[j];
                axpy(a, d_ctx, &mut d_states[j]);
                let de = a * (d_att[j] - mean);
                if de == 0.0 {
                    continue;
                }
                let u = &step.att_hidden[j];
                axpy(de, u, &mut grads.att_v.data);
                for i in 0..hdim {
                    let dpre = de * p.att_v.data[i] * (1.0 - u[i] * u[i]);
                    dq[i] += dpre;
                    d_keys[j][i] += dpre;
                }
            }
            grads.att_dec.outer_add(&dq, &step.cell.h_out);
            p.att_dec.matvec_t_add(&dq, &mut ds);

            // decoder recurrence
            let mut g = CellGrad {
                w: &mut grads.dec_w,
                u: &mut grads.dec_u,
                b: &mut grads.dec_b,
            };
            let (dx, dh_prev) = dec_cell.backward(&step.cell, &ds, masks.decoder.as_deref(), &mut g);
            let prev_tok = if t == 0 { BOS } else { fwd.steps[t - 1].target };
            axpy(1.0, &dx, grads.tgt_embed.row_mut(prev_tok));
            ds_next = dh_prev;
        }

        // decoder initial state is the last encoder state
        axpy(1.0, &ds_next, &mut d_states[n_src - 1]);
        for j in 0..n_src {
            grads.att_src.outer_add(&d_keys[j], &fwd.encoded.states[j]);
            p.att_src.matvec_t_add(&d_keys[j], &mut d_states[j]);
        }

        let enc_cell = self.encoder_cell();
        let mut dh_carry = vec![0.0; hdim];
        for (j, cache) in fwd.encoder.iter().enumerate().rev() {
            let mut dh = d_states[j].clone();
            axpy(1.0, &dh_carry, &mut dh);
            let mut g = CellGrad {
                w: &mut grads.enc_w,
                u: &mut grads.enc_u,
                b: &mut grads.enc_b,
            };
            let (dx, dh_prev) = enc_cell.backward(cache, &dh, masks.encoder.as_deref(), &mut g);
            axpy(1.0, &dx, grads.src_embed.row_mut(src[j]));
            dh_carry = dh_prev;
        }
        Ok(fwd.log_prob)
    }

    /// log P(tgt|src) through the training code path, no dropout.
    pub fn log_prob_cached(&self, src: &[usize], tgt: &[usize]) -> Result<f64> {
        Ok(self.forward_cached(src, tgt, &DropoutMasks::default())?.log_prob)
    }
}
