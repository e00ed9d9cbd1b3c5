use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{accumulate_grad, log_prob, PolicyError, PolicyParams, ScenarioFeatures};
use crate::tokenizer::TokenSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SftResult {
    pub params: PolicyParams,
    /// Mean per-token negative log-likelihood of each minibatch, before its
    /// update.
    pub losses: Vec<f64>,
}

/// Mean per-token log-likelihood of the demonstrations.
pub fn mean_log_likelihood(p: &PolicyParams, demos: &[(ScenarioFeatures, TokenSequence)]) -> f64 {
    let tokens: usize = demos.iter().map(|(_, ids)| ids.len()).sum();
    let total: f64 = demos.iter().map(|(f, ids)| log_prob(p, f, ids).1).sum();
    total / tokens.max(1) as f64
}

/// Minibatch gradient descent on mean per-token cross-entropy. Minibatches
/// are drawn with replacement; a batch size at least the demo count uses
/// every demo every step.
pub fn sft_fit(
    p: &PolicyParams,
    demos: &[(ScenarioFeatures, TokenSequence)],
    cfg: &SftConfig,
) -> Result<SftResult, PolicyError> {
    if demos.is_empty() {
        return Err(PolicyError::NoDemos);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = p.clone();
    let mut losses = Vec::with_capacity(cfg.steps);
    let full = cfg.batch_size >= demos.len();
    for _ in 0..cfg.steps {
        let batch: Vec<usize> = if full {
            (0..demos.len()).collect()
        } else {
            (0..cfg.batch_size).map(|_| rng.gen_range(0..demos.len())).collect()
        };
        let tokens: usize = batch.iter().map(|&i| demos[i].1.len()).sum();
        let mut grad = params.zeros_like();
        let mut loss = 0.0;
        for &i in &batch {
            let (f, ids) = &demos[i];
            loss -= log_prob(&params, f, ids).1;
            accumulate_grad(&params, f, ids, &vec![1.0; ids.len()], &mut grad);
        }
        losses.push(loss / tokens.max(1) as f64);
        params.axpy(cfg.lr / tokens.max(1) as f64, &grad);
    }
    Ok(SftResult { params, losses })
}
