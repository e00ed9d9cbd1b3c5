use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PolicyParams, ScenarioFeatures};
use crate::tokenizer::TokenSequence;

fn initial_state(p: &PolicyParams, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), p.n_features, "feature dimension mismatch");
    p.feature_weights
        .chunks_exact(p.n_features.max(1))
        .take(p.dim())
        .map(|row| row.iter().zip(f).map(|(w, x)| w * x).sum())
        .collect()
}

fn next_state(p: &PolicyParams, s: &[f64], id: usize) -> Vec<f64> {
    let d = p.dim();
    let e = p.token_embeddings.row(id);
    (0..d)
        .map(|i| {
            let row = &p.step_weights[i * d..(i + 1) * d];
            (row.iter().zip(s).map(|(w, x)| w * x).sum::<f64>() + e[i]).tanh()
        })
        .collect()
}

fn logits(p: &PolicyParams, s: &[f64]) -> Vec<f64> {
    (0..p.vocab())
        .map(|v| p.token_embeddings.row(v).iter().zip(s).map(|(e, x)| e * x).sum::<f64>() + p.output_bias[v])
        .collect()
}

/// Softmax of `z / temperature`, computed stably.
fn softmax(z: &[f64], temperature: f64) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = z.iter().map(|x| ((x - m) / temperature).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter_mut().for_each(|x| *x /= total);
    e
}

fn log_softmax_at(z: &[f64], id: usize) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    z[id] - lse
}

/// Next-token distribution after `prefix` at the given temperature.
pub fn step_distribution(p: &PolicyParams, f: &ScenarioFeatures, prefix: &[usize], temperature: f64) -> Vec<f64> {
    let mut s = initial_state(p, f.as_slice());
    for &id in prefix {
        s = next_state(p, &s, id);
    }
    softmax(&logits(p, &s), temperature)
}

/// Per-token log-probabilities of `ids` and their sum.
pub fn log_prob(p: &PolicyParams, f: &ScenarioFeatures, ids: &TokenSequence) -> (Vec<f64>, f64) {
    let mut s = initial_state(p, f.as_slice());
    let mut out = Vec::with_capacity(ids.len());
    for (t, &id) in ids.iter().enumerate() {
        out.push(log_softmax_at(&logits(p, &s), id));
        if t + 1 < ids.len() {
            s = next_state(p, &s, id);
        }
    }
    let total = out.iter().sum();
    (out, total)
}

/// Adds `Σ_t weights[t] · ∇ log p(id_t | ·)` to `grad`.
pub fn accumulate_grad(
    p: &PolicyParams,
    f: &ScenarioFeatures,
    ids: &TokenSequence,
    weights: &[f64],
    grad: &mut PolicyParams,
) {
    let (v, d, nf) = (p.vocab(), p.dim(), p.n_features);
    let n = ids.len();
    assert_eq!(weights.len(), n);
    if n == 0 {
        return;
    }
    let ids = ids.ids();
    let mut states = Vec::with_capacity(n);
    states.push(initial_state(p, f.as_slice()));
    for t in 1..n {
        let next = next_state(p, &states[t - 1], ids[t - 1]);
        states.push(next);
    }

    let mut ds: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    for t in 0..n {
        let w = weights[t];
        if w == 0.0 {
            continue;
        }
        let probs = softmax(&logits(p, &states[t]), 1.0);
        for (tok, pr) in probs.iter().enumerate() {
            let g = w * (if tok == ids[t] { 1.0 } else { 0.0 } - pr);
            grad.output_bias[tok] += g;
            let e = p.token_embeddings.row(tok);
            let de = grad.token_embeddings.row_mut(tok);
            for i in 0..d {
                de[i] += g * states[t][i];
                ds[t][i] += g * e[i];
            }
        }
    }

    for t in (1..n).rev() {
        let da: Vec<f64> = (0..d).map(|i| ds[t][i] * (1.0 - states[t][i] * states[t][i])).collect();
        let prev = &states[t - 1];
        for i in 0..d {
            for j in 0..d {
                grad.step_weights[i * d + j] += da[i] * prev[j];
            }
        }
        let de = grad.token_embeddings.row_mut(ids[t - 1]);
        for i in 0..d {
            de[i] += da[i];
        }
        for j in 0..d {
            let back: f64 = (0..d).map(|i| p.step_weights[i * d + j] * da[i]).sum();
            ds[t - 1][j] += back;
        }
    }

    let fv = f.as_slice();
    for i in 0..d {
        for k in 0..nf {
            grad.feature_weights[i * nf + k] += ds[0][i] * fv[k];
        }
    }
    debug_assert_eq!(grad.vocab(), v);
}

/// Gradient of the summed log-probability.
pub fn grad_log_prob(p: &PolicyParams, f: &ScenarioFeatures, ids: &TokenSequence) -> PolicyParams {
    let mut g = p.zeros_like();
    accumulate_grad(p, f, ids, &vec![1.0; ids.len()], &mut g);
    g
}

/// Ancestral sampling with logits divided by `temperature`. The returned
/// log-probabilities are those of the untempered model.
pub fn sample_with_log_probs<R: Rng>(
    p: &PolicyParams,
    f: &ScenarioFeatures,
    temperature: f64,
    len: usize,
    rng: &mut R,
) -> (TokenSequence, Vec<f64>) {
    assert!(temperature > 0.0, "temperature must be positive");
    let mut s = initial_state(p, f.as_slice());
    let mut ids = Vec::with_capacity(len);
    let mut logps = Vec::with_capacity(len);
    for t in 0..len {
        let z = logits(p, &s);
        let probs = softmax(&z, temperature);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (tok, pr) in probs.iter().enumerate() {
            acc += pr;
            if u < acc {
                pick = tok;
                break;
            }
        }
        ids.push(pick);
        logps.push(log_softmax_at(&z, pick));
        if t + 1 < len {
            s = next_state(p, &s, pick);
        }
    }
    (TokenSequence::new(ids), logps)
}

pub fn sample(p: &PolicyParams, f: &ScenarioFeatures, temperature: f64, len: usize, seed: u64) -> TokenSequence {
    sample_with_log_probs(p, f, temperature, len, &mut ChaCha8Rng::seed_from_u64(seed)).0
}

/// Argmax decoding; ties go to the lowest id.
pub fn greedy(p: &PolicyParams, f: &ScenarioFeatures, len: usize) -> TokenSequence {
    let mut s = initial_state(p, f.as_slice());
    let mut ids = Vec::with_capacity(len);
    for t in 0..len {
        let z = logits(p, &s);
        let mut best = 0;
        for (tok, &x) in z.iter().enumerate() {
            if x > z[best] {
                best = tok;
            }
        }
        ids.push(best);
        if t + 1 < len {
            s = next_state(p, &s, best);
        }
    }
    TokenSequence::new(ids)
}
