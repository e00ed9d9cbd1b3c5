use serde::{Deserialize, Serialize};

use super::{OptimError, RolloutGroup};
use crate::policy::{accumulate_grad, log_prob, PolicyParams};

/// Asymmetric ratio clipping: the ratio is confined to
/// `[1 − eps_low, 1 + eps_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Default for ClipConfig {
    fn default() -> Self {
        ClipConfig { eps_low: 0.2, eps_high: 0.1 }
    }
}

impl ClipConfig {
    pub fn bounds(&self) -> (f64, f64) {
        (1.0 - self.eps_low, 1.0 + self.eps_high)
    }
}

/// Value and gradient of the clipped surrogate for one group.
#[derive(Debug, Clone)]
pub struct SurrogateOutput {
    pub loss: f64,
    pub grad: PolicyParams,
    pub tokens: usize,
    /// Tokens whose clipped branch was strictly smaller, so they pass no
    /// gradient.
    pub clipped_tokens: usize,
}

/// `−Σ_i Σ_t min(ρ·A_i, clip(ρ)·A_i)` with `ρ = exp(new − old)`, summed
/// without length or group normalization and without a KL penalty.
///
/// Where both branches are equal the unclipped one is taken, so the gradient
/// inside the clip interval is the ordinary `ρ·A·∇log p`.
pub fn surrogate_loss_and_grad(
    p_new: &PolicyParams,
    group: &RolloutGroup,
    advantages: &[f64],
    clip: &ClipConfig,
) -> Result<SurrogateOutput, OptimError> {
    if advantages.len() != group.rollouts.len() {
        return Err(OptimError::Contract(format!(
            "{} advantages for {} rollouts",
            advantages.len(),
            group.rollouts.len()
        )));
    }
    let (lo, hi) = clip.bounds();
    let mut grad = p_new.zeros_like();
    let mut loss = 0.0;
    let mut tokens = 0;
    let mut clipped_tokens = 0;
    for (ro, &adv) in group.rollouts.iter().zip(advantages) {
        if ro.old_log_probs.len() != ro.ids.len() {
            return Err(OptimError::Contract(format!(
                "rollout in {} has {} old log-probs for {} tokens",
                group.scenario_id,
                ro.old_log_probs.len(),
                ro.ids.len()
            )));
        }
        let (new_lp, _) = log_prob(p_new, &group.features, &ro.ids);
        let mut weights = vec![0.0; ro.ids.len()];
        for (t, (new, old)) in new_lp.iter().zip(&ro.old_log_probs).enumerate() {
            let ratio = (new - old).exp();
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(lo, hi) * adv;
            tokens += 1;
            if unclipped <= clipped {
                loss -= unclipped;
                weights[t] = -unclipped;
            } else {
                loss -= clipped;
                clipped_tokens += 1;
            }
        }
        if weights.iter().any(|&w| w != 0.0) {
            accumulate_grad(p_new, &group.features, &ro.ids, &weights, &mut grad);
        }
    }
    Ok(SurrogateOutput { loss, grad, tokens, clipped_tokens })
}
