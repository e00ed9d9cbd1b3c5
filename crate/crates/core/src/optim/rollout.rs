use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::advantage::{mean, population_std};
use crate::policy::{features, sample_with_log_probs, PolicyParams, ScenarioFeatures};
use crate::rewards::{
    format_reward, length_reward, normalized_rfs, pdm_components, pdm_score, rfs, DacMode, RewardBreakdown, RfsConfig,
};
use crate::sim::{execute, Scenario, ScenarioStyle, SimConfig};
use crate::tokenizer::{decode, parse, serialize, Codebook, TokenSequence};

/// Everything needed to turn a token sequence into a reward.
#[derive(Debug, Clone)]
pub struct RewardEnv {
    pub codebook: Codebook,
    pub sim: SimConfig,
    pub rfs: RfsConfig,
    pub dac: DacMode,
}

impl RewardEnv {
    pub fn new(codebook: Codebook) -> Self {
        RewardEnv { codebook, sim: SimConfig::default(), rfs: RfsConfig::default(), dac: DacMode::default() }
    }

    /// Scores emitted text exactly as a language model's output would be:
    /// parse, decode from the ego pose, replay, and evaluate.
    pub fn score_text(&self, sc: &Scenario, text: &str) -> RewardBreakdown {
        let rf = format_reward(text);
        let ids = parse(text).unwrap_or_default();
        let rl = length_reward(&ids, sc.token_count());
        let rd = self.dataset_reward(sc, &ids);
        RewardBreakdown::new(rf, rl, rd).expect("reward components in range")
    }

    /// PDM composite or normalized rater score of the decoded trajectory;
    /// zero when the sequence cannot be decoded or does not cover the
    /// horizon.
    pub fn dataset_reward(&self, sc: &Scenario, ids: &TokenSequence) -> f64 {
        let Ok(traj) = decode(ids, &self.codebook, sc.ego.pose) else {
            return 0.0;
        };
        match sc.style {
            ScenarioStyle::Navsim => match execute(sc, &traj, &self.sim) {
                Ok(out) => pdm_score(&pdm_components(&out, &self.sim, self.dac)),
                Err(_) => 0.0,
            },
            ScenarioStyle::Waymo => {
                rfs(&traj, &sc.rater_refs, sc.ego.speed, &self.rfs).map(normalized_rfs).unwrap_or(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub ids: TokenSequence,
    /// Per-token log-probabilities under the sampling snapshot.
    pub old_log_probs: Vec<f64>,
    pub text: String,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub scenario_id: String,
    pub features: ScenarioFeatures,
    pub rollouts: Vec<Rollout>,
    /// Mean of `r_total`.
    pub group_mean: f64,
    /// Population standard deviation of `r_total`.
    pub group_std: f64,
}

impl RolloutGroup {
    pub fn total_rewards(&self) -> Vec<f64> {
        self.rollouts.iter().map(|r| r.reward.r_total).collect()
    }

    pub fn dataset_rewards(&self) -> Vec<f64> {
        self.rollouts.iter().map(|r| r.reward.r_dataset).collect()
    }

    pub fn from_rollouts(scenario_id: String, features: ScenarioFeatures, rollouts: Vec<Rollout>) -> Self {
        let r: Vec<f64> = rollouts.iter().map(|r| r.reward.r_total).collect();
        RolloutGroup { scenario_id, features, group_mean: mean(&r), group_std: population_std(&r), rollouts }
    }
}

/// Draws `g` sequences from the frozen policy, rollout `i` on stream `i` of
/// a generator seeded with `seed`, and scores each through the text path.
pub fn rollout_group(
    p: &PolicyParams,
    sc: &Scenario,
    g: usize,
    temperature: f64,
    expected_len: usize,
    seed: u64,
    env: &RewardEnv,
) -> RolloutGroup {
    let feats = features(sc);
    let rollouts = (0..g)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let (ids, old_log_probs) = sample_with_log_probs(p, &feats, temperature, expected_len, &mut rng);
            let text = serialize(&ids);
            let reward = env.score_text(sc, &text);
            Rollout { ids, old_log_probs, text, reward }
        })
        .collect();
    RolloutGroup::from_rollouts(sc.id.clone(), feats, rollouts)
}
