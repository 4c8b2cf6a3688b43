//! Student models behind a sequence-to-sequence interface, and the built-in
//! bag-of-words encoder / feed-forward decoder student.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tokenizer::{Tokenizer, BOS, EOS, PAD, UNK};
use crate::rng;
use crate::Scalar;

/// A text-to-text model trainable by teacher forcing.
///
/// Parameters are exposed as one flat slice so optimizers and gradient
/// checks work on any implementation.
pub trait Seq2SeqStudent<T: Scalar>: Send + Sync {
    fn params(&self) -> &[T];
    fn params_mut(&mut self) -> &mut [T];

    /// Number of target tokens scored for `target`, end-of-sequence included.
    fn target_len(&self, target: &str) -> usize;

    /// Longest target (in scored tokens) the model accepts.
    fn max_target_len(&self) -> usize;

    /// Mean token cross-entropy of `target` given `input`.
    fn sequence_loss(&self, input: &str, target: &str) -> T;

    /// As [`sequence_loss`](Self::sequence_loss), also adding
    /// `scale * d(loss)/d(params)` into `grad`.
    fn sequence_loss_grad(&self, input: &str, target: &str, scale: T, grad: &mut [T]) -> T;

    /// Greedy decoding of at most `max_new_tokens` tokens; returns the text and
    /// the number of tokens emitted.
    fn generate(&self, input: &str, max_new_tokens: usize) -> (String, usize);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub positions: usize,
    pub max_target_len: usize,
}

impl MlpDims {
    pub fn num_params(&self) -> usize {
        Layout::new(self).total
    }
}

/// Offsets of each tensor in the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    enc_embed: usize,
    enc_w: usize,
    enc_b: usize,
    dec_embed: usize,
    pos_embed: usize,
    dec_w: usize,
    dec_b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    fn new(d: &MlpDims) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let start = at;
            at += n;
            start
        };
        let enc_embed = take(d.vocab * d.embed);
        let enc_w = take(d.hidden * d.embed);
        let enc_b = take(d.hidden);
        let dec_embed = take(d.vocab * d.embed);
        let pos_embed = take(d.positions * d.embed);
        let dec_w = take(d.hidden * (d.hidden + d.embed));
        let dec_b = take(d.hidden);
        let out_w = take(d.vocab * d.hidden);
        let out_b = take(d.vocab);
        Self { enc_embed, enc_w, enc_b, dec_embed, pos_embed, dec_w, dec_b, out_w, out_b, total: at }
    }
}

/// Built-in toy student.
///
/// Encoder: mean of input-token embeddings followed by a tanh layer giving
/// the context vector `u`. Decoder step `t`: `s = tanh(W [u; E[y_{t-1}] + P[t]] + b)`
/// and logits `V s + c`. Small enough for finite-difference checks, strong
/// enough to learn keyword-deducible multiple choice.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpStudent<T: Scalar> {
    pub dims: MlpDims,
    pub tokenizer: Tokenizer,
    params: Vec<T>,
    layout: LayoutCell,
}

#[derive(Debug, Clone, Copy)]
struct LayoutCell(Layout);

impl PartialEq for LayoutCell {
    fn eq(&self, other: &Self) -> bool {
        self.0.total == other.0.total
    }
}

/// Forward activations kept for the backward pass.
struct Trace<T> {
    input_ids: Vec<usize>,
    x: Vec<T>,
    u: Vec<T>,
    steps: Vec<StepTrace<T>>,
}

struct StepTrace<T> {
    prev: usize,
    pos: usize,
    target: usize,
    s: Vec<T>,
    probs: Vec<T>,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

impl<T: Scalar> MlpStudent<T> {
    /// Fresh student with weights drawn from `N(0, 1/fan_in)` by `seed`.
    pub fn new(tokenizer: Tokenizer, embed: usize, hidden: usize, max_target_len: usize, seed: u64) -> Self {
        let dims = MlpDims { vocab: tokenizer.vocab_size(), embed, hidden, positions: 32, max_target_len };
        let layout = Layout::new(&dims);
        let mut params = vec![T::zero(); layout.total];
        let mut rng = rng::stream(seed, "student.init");
        let mut fill = |range: std::ops::Range<usize>, std: f64, params: &mut Vec<T>| {
            for p in &mut params[range] {
                *p = T::of(normal(&mut rng) * std);
            }
        };
        let l = layout;
        fill(l.enc_embed..l.enc_w, 1.0 / (embed as f64).sqrt(), &mut params);
        fill(l.enc_w..l.enc_b, 1.0 / (embed as f64).sqrt(), &mut params);
        fill(l.dec_embed..l.pos_embed, 1.0 / (embed as f64).sqrt(), &mut params);
        fill(l.pos_embed..l.dec_w, 0.1 / (embed as f64).sqrt(), &mut params);
        fill(l.dec_w..l.dec_b, 1.0 / ((hidden + embed) as f64).sqrt(), &mut params);
        fill(l.out_w..l.out_b, 1.0 / (hidden as f64).sqrt(), &mut params);
        Self { dims, tokenizer, params, layout: LayoutCell(layout) }
    }

    /// Rebuilds a student from saved parts.
    pub fn from_parts(dims: MlpDims, tokenizer: Tokenizer, params: Vec<T>) -> Result<Self, String> {
        let layout = Layout::new(&dims);
        if params.len() != layout.total {
            return Err(format!("expected {} parameters, found {}", layout.total, params.len()));
        }
        if tokenizer.vocab_size() != dims.vocab {
            return Err(format!("tokenizer has {} tokens, dims say {}", tokenizer.vocab_size(), dims.vocab));
        }
        Ok(Self { dims, tokenizer, params, layout: LayoutCell(layout) })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Converts the weights to another scalar type.
    pub fn cast<U: Scalar>(&self) -> MlpStudent<U> {
        MlpStudent {
            dims: self.dims,
            tokenizer: self.tokenizer.clone(),
            params: self.params.iter().map(|p| U::of(p.as_f64())).collect(),
            layout: self.layout,
        }
    }

    fn lay(&self) -> &Layout {
        &self.layout.0
    }

    fn encode(&self, input: &str) -> (Vec<usize>, Vec<T>, Vec<T>) {
        let d = self.dims;
        let l = self.lay();
        let mut ids = self.tokenizer.encode(input);
        if ids.is_empty() {
            ids.push(PAD);
        }
        let mut x = vec![T::zero(); d.embed];
        for &id in &ids {
            let row = &self.params[l.enc_embed + id * d.embed..][..d.embed];
            for (xi, &e) in x.iter_mut().zip(row) {
                *xi += e;
            }
        }
        let inv = T::one() / T::of_usize(ids.len());
        x.iter_mut().for_each(|v| *v *= inv);
        let mut u = vec![T::zero(); d.hidden];
        for (j, uj) in u.iter_mut().enumerate() {
            let w = &self.params[l.enc_w + j * d.embed..][..d.embed];
            let acc: T = w.iter().zip(&x).map(|(&a, &b)| a * b).sum();
            *uj = (acc + self.params[l.enc_b + j]).tanh();
        }
        (ids, x, u)
    }

    /// Decoder hidden state and output logits for one step.
    fn step(&self, u: &[T], prev: usize, pos: usize) -> (Vec<T>, Vec<T>) {
        let d = self.dims;
        let l = self.lay();
        let width = d.hidden + d.embed;
        let mut z = Vec::with_capacity(width);
        z.extend_from_slice(u);
        let emb = &self.params[l.dec_embed + prev * d.embed..][..d.embed];
        let pe = &self.params[l.pos_embed + pos * d.embed..][..d.embed];
        z.extend(emb.iter().zip(pe).map(|(&a, &b)| a + b));
        let mut s = vec![T::zero(); d.hidden];
        for (j, sj) in s.iter_mut().enumerate() {
            let w = &self.params[l.dec_w + j * width..][..width];
            let acc: T = w.iter().zip(&z).map(|(&a, &b)| a * b).sum();
            *sj = (acc + self.params[l.dec_b + j]).tanh();
        }
        let mut logits = vec![T::zero(); d.vocab];
        for (k, lk) in logits.iter_mut().enumerate() {
            let w = &self.params[l.out_w + k * d.hidden..][..d.hidden];
            let acc: T = w.iter().zip(&s).map(|(&a, &b)| a * b).sum();
            *lk = acc + self.params[l.out_b + k];
        }
        (s, logits)
    }

    fn target_ids(&self, target: &str) -> Vec<usize> {
        let mut ids = self.tokenizer.encode(target);
        ids.push(EOS);
        ids
    }

    fn forward(&self, input: &str, target: &str) -> (T, Trace<T>) {
        let (input_ids, x, u) = self.encode(input);
        let targets = self.target_ids(target);
        let mut prev = BOS;
        let mut total = T::zero();
        let mut steps = Vec::with_capacity(targets.len());
        for (t, &y) in targets.iter().enumerate() {
            let pos = t.min(self.dims.positions - 1);
            let (s, logits) = self.step(&u, prev, pos);
            let lse = log_sum_exp(&logits);
            total += lse - logits[y];
            let probs = logits.iter().map(|&v| (v - lse).exp()).collect();
            steps.push(StepTrace { prev, pos, target: y, s, probs });
            prev = y;
        }
        let mean = total / T::of_usize(targets.len());
        (mean, Trace { input_ids, x, u, steps })
    }

    fn backward(&self, trace: &Trace<T>, scale: T, grad: &mut [T]) {
        let d = self.dims;
        let l = *self.lay();
        let width = d.hidden + d.embed;
        let n_steps = T::of_usize(trace.steps.len());
        let mut du = vec![T::zero(); d.hidden];
        let mut z = vec![T::zero(); width];
        for st in &trace.steps {
            z[..d.hidden].copy_from_slice(&trace.u);
            let emb = &self.params[l.dec_embed + st.prev * d.embed..][..d.embed];
            let pe = &self.params[l.pos_embed + st.pos * d.embed..][..d.embed];
            for (i, zi) in z[d.hidden..].iter_mut().enumerate() {
                *zi = emb[i] + pe[i];
            }
            // d(-log p_y)/d logits = p - onehot(y), averaged over steps.
            let mut ds = vec![T::zero(); d.hidden];
            for k in 0..d.vocab {
                let mut g = st.probs[k];
                if k == st.target {
                    g -= T::one();
                }
                g = g * scale / n_steps;
                if g == T::zero() {
                    continue;
                }
                grad[l.out_b + k] += g;
                let w = &self.params[l.out_w + k * d.hidden..][..d.hidden];
                let gw = &mut grad[l.out_w + k * d.hidden..][..d.hidden];
                for j in 0..d.hidden {
                    gw[j] += g * st.s[j];
                    ds[j] += g * w[j];
                }
            }
            let mut dz = vec![T::zero(); width];
            for j in 0..d.hidden {
                let da = ds[j] * (T::one() - st.s[j] * st.s[j]);
                grad[l.dec_b + j] += da;
                let w = &self.params[l.dec_w + j * width..][..width];
                let gw = &mut grad[l.dec_w + j * width..][..width];
                for i in 0..width {
                    gw[i] += da * z[i];
                    dz[i] += da * w[i];
                }
            }
            for (j, g) in du.iter_mut().enumerate() {
                *g += dz[j];
            }
            for i in 0..d.embed {
                grad[l.dec_embed + st.prev * d.embed + i] += dz[d.hidden + i];
                grad[l.pos_embed + st.pos * d.embed + i] += dz[d.hidden + i];
            }
        }
        let mut dx = vec![T::zero(); d.embed];
        for j in 0..d.hidden {
            let da = du[j] * (T::one() - trace.u[j] * trace.u[j]);
            grad[l.enc_b + j] += da;
            let w = &self.params[l.enc_w + j * d.embed..][..d.embed];
            let gw = &mut grad[l.enc_w + j * d.embed..][..d.embed];
            for i in 0..d.embed {
                gw[i] += da * trace.x[i];
                dx[i] += da * w[i];
            }
        }
        let inv = T::one() / T::of_usize(trace.input_ids.len());
        for &id in &trace.input_ids {
            for i in 0..d.embed {
                grad[l.enc_embed + id * d.embed + i] += dx[i] * inv;
            }
        }
    }
}

fn log_sum_exp<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

impl<T: Scalar> Seq2SeqStudent<T> for MlpStudent<T> {
    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn target_len(&self, target: &str) -> usize {
        self.tokenizer.encode(target).len() + 1
    }

    fn max_target_len(&self) -> usize {
        self.dims.max_target_len
    }

    fn sequence_loss(&self, input: &str, target: &str) -> T {
        self.forward(input, target).0
    }

    fn sequence_loss_grad(&self, input: &str, target: &str, scale: T, grad: &mut [T]) -> T {
        let (loss, trace) = self.forward(input, target);
        self.backward(&trace, scale, grad);
        loss
    }

    fn generate(&self, input: &str, max_new_tokens: usize) -> (String, usize) {
        let (_, _, u) = self.encode(input);
        let mut prev = BOS;
        let mut out = Vec::new();
        for t in 0..max_new_tokens {
            let (_, logits) = self.step(&u, prev, t.min(self.dims.positions - 1));
            let next = logits
                .iter()
                .enumerate()
                .filter(|(k, _)| ![PAD, BOS, UNK].contains(k))
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(k, _)| k)
                .unwrap_or(EOS);
            if next == EOS {
                break;
            }
            out.push(next);
            prev = next;
        }
        let n = out.len();
        (self.tokenizer.decode(&out), n)
    }
}

/// Convenience for tests and tools: a random direction with unit L2 norm.
pub fn random_unit_direction<T: Scalar>(len: usize, seed: u64) -> Vec<T> {
    let mut rng = rng::stream(seed, "student.direction");
    let raw: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| T::of(v / norm)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpStudent<f64> {
        let tok = Tokenizer::fit(["[answer] which fruit ? apple stone", "because apple is a fruit"]);
        MlpStudent::new(tok, 6, 8, 64, 1)
    }

    #[test]
    fn loss_is_positive_and_deterministic() {
        let s = tiny();
        let a = s.sequence_loss("[answer] which fruit ?", "apple");
        assert!(a > 0.0 && a.is_finite());
        assert_eq!(a.to_bits(), s.sequence_loss("[answer] which fruit ?", "apple").to_bits());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = tiny();
        let (input, target) = ("[answer] which fruit ? apple stone", "because apple is a fruit");
        let mut grad = vec![0.0; s.num_params()];
        s.sequence_loss_grad(input, target, 1.0, &mut grad);
        let h = 1e-5;
        for idx in (0..s.num_params()).step_by(7) {
            let mut plus = s.clone();
            plus.params_mut()[idx] += h;
            let mut minus = s.clone();
            minus.params_mut()[idx] -= h;
            let fd = (plus.sequence_loss(input, target) - minus.sequence_loss(input, target)) / (2.0 * h);
            assert!((fd - grad[idx]).abs() < 1e-6, "param {idx}: fd {fd} vs {}", grad[idx]);
        }
    }

    #[test]
    fn f32_and_f64_agree() {
        let s = tiny();
        let s32: MlpStudent<f32> = s.cast();
        let a = s.sequence_loss("[answer] which fruit ?", "apple");
        let b = s32.sequence_loss("[answer] which fruit ?", "apple");
        assert!((a - b as f64).abs() < 1e-4);
    }

    #[test]
    fn generation_respects_token_budget() {
        let s = tiny();
        let (_, n) = s.generate("[explain] which fruit ?", 5);
        assert!(n <= 5);
    }
}
