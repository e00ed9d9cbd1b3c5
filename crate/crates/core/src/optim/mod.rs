//! Group-relative advantages, the clipped surrogate, rollouts and training.

mod advantage;
mod rollout;
mod surrogate;
mod train;

pub use advantage::{drgrpo_advantage, grpo_advantage, mean, population_std, Algo, EPS_STD};
pub use rollout::{rollout_group, RewardEnv, Rollout, RolloutGroup};
pub use surrogate::{surrogate_loss_and_grad, ClipConfig, SurrogateOutput};
pub use train::{train, GroupSummary, StepRecord, TrainConfig, TrainHistory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{grad_log_prob, log_prob, PolicyParams, ScenarioFeatures};
    use crate::rewards::RewardBreakdown;
    use crate::tokenizer::{serialize, TokenSequence};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn group_for(p: &PolicyParams, seed: u64, g: usize, t: usize) -> RolloutGroup {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ScenarioFeatures((0..p.n_features).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let rollouts = (0..g)
            .map(|_| {
                let ids = TokenSequence::new((0..t).map(|_| rng.gen_range(0..p.vocab())).collect());
                let (old, _) = log_prob(p, &f, &ids);
                let rd = rng.gen_range(0.0..1.0);
                Rollout { text: serialize(&ids), ids, old_log_probs: old, reward: RewardBreakdown::new(0.25, 0.25, rd).unwrap() }
            })
            .collect();
        RolloutGroup::from_rollouts("t".into(), f, rollouts)
    }

    #[test]
    fn ratio_one_reduces_to_policy_gradient() {
        let p = PolicyParams::init(8, 4, 3, 0.7, 1);
        let group = group_for(&p, 2, 4, 3);
        let adv = drgrpo_advantage(&group.total_rewards());
        let out = surrogate_loss_and_grad(&p, &group, &adv, &ClipConfig::default()).unwrap();
        let expect_loss: f64 = -adv.iter().map(|a| 3.0 * a).sum::<f64>();
        assert_abs_diff_eq!(out.loss, expect_loss, epsilon = 1e-12);
        let mut expect = p.zeros_like();
        for (ro, a) in group.rollouts.iter().zip(&adv) {
            expect.axpy(-a, &grad_log_prob(&p, &group.features, &ro.ids));
        }
        for i in 0..p.n_params() {
            assert_abs_diff_eq!(out.grad.get(i), expect.get(i), epsilon = 1e-12);
        }
        assert_eq!(out.clipped_tokens, 0);
    }

    #[test]
    fn clipped_high_ratio_passes_no_gradient() {
        // one rollout, one token, old log-prob set so that ρ = 1.5
        let p = PolicyParams::init(8, 4, 3, 0.7, 3);
        let mut group = group_for(&p, 4, 2, 1);
        group.rollouts.truncate(1);
        group.rollouts[0].old_log_probs[0] -= 1.5f64.ln();
        let out = surrogate_loss_and_grad(&p, &group, &[2.0], &ClipConfig::default()).unwrap();
        assert_abs_diff_eq!(out.loss, -1.1 * 2.0, epsilon = 1e-12);
        assert_eq!(out.grad.norm(), 0.0);
        assert_eq!(out.clipped_tokens, 1);
    }

    #[test]
    fn zero_advantage_gives_zero_gradient() {
        let p = PolicyParams::init(8, 4, 3, 0.7, 5);
        let group = group_for(&p, 6, 8, 3);
        let out = surrogate_loss_and_grad(&p, &group, &[0.0; 8], &ClipConfig::default()).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.grad.norm(), 0.0);
    }

    #[test]
    fn symmetric_clip_is_standard_ppo() {
        let p = PolicyParams::init(8, 4, 3, 0.7, 7);
        let mut q = p.clone();
        q.output_bias[0] += 0.4;
        q.step_weights[3] -= 0.3;
        let group = group_for(&p, 8, 6, 3);
        let adv = grpo_advantage(&group.total_rewards());
        let eps = 0.15;
        let out = surrogate_loss_and_grad(&q, &group, &adv, &ClipConfig { eps_low: eps, eps_high: eps }).unwrap();
        let mut ppo = 0.0;
        for (ro, a) in group.rollouts.iter().zip(&adv) {
            let (new, _) = log_prob(&q, &group.features, &ro.ids);
            for (n, o) in new.iter().zip(&ro.old_log_probs) {
                let r = (n - o).exp();
                ppo -= (r * a).min(r.clamp(1.0 - eps, 1.0 + eps) * a);
            }
        }
        assert_abs_diff_eq!(out.loss, ppo, epsilon = 1e-12);
    }

    #[test]
    fn missing_old_log_probs_rejected() {
        let p = PolicyParams::init(8, 4, 3, 0.7, 9);
        let mut group = group_for(&p, 10, 2, 3);
        group.rollouts[1].old_log_probs.pop();
        assert!(matches!(
            surrogate_loss_and_grad(&p, &group, &[1.0, -1.0], &ClipConfig::default()),
            Err(OptimError::Contract(_))
        ));
    }
}
