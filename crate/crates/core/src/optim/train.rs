use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rollout_group, surrogate_loss_and_grad, Algo, ClipConfig, OptimError, RewardEnv, RolloutGroup};
use crate::derive_seed;
use crate::policy::PolicyParams;
use crate::sim::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algo: Algo,
    pub steps: usize,
    pub lr: f64,
    pub clip: ClipConfig,
    pub group_size: usize,
    pub temperature: f64,
    /// Scenarios rolled out per step.
    pub batch_size: usize,
    /// Gradient steps taken on each batch of rollouts.
    pub updates_per_batch: usize,
    /// Rescale the summed gradient to at most this norm.
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Drgrpo,
            steps: 200,
            lr: 0.05,
            clip: ClipConfig::default(),
            group_size: 8,
            temperature: 1.0,
            batch_size: 32,
            updates_per_batch: 1,
            max_grad_norm: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub scenario_id: String,
    pub group_mean: f64,
    pub group_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub groups: Vec<GroupSummary>,
    /// Mean `r_total` over the step's rollouts.
    pub mean_reward: f64,
    pub clip_frac: f64,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub algo: Algo,
    pub records: Vec<StepRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "step,scenario_id,group_mean,group_std,algo,clip_frac";

    /// One row per scenario per step and a closing `final,all,...` row with
    /// the averages of the last step.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            for g in &r.groups {
                let _ = writeln!(out, "{},{},{},{},{},{}", r.step, g.scenario_id, g.group_mean, g.group_std, self.algo, r.clip_frac);
            }
        }
        if let Some(last) = self.records.last() {
            let n = last.groups.len().max(1) as f64;
            let std = last.groups.iter().map(|g| g.group_std).sum::<f64>() / n;
            let _ = writeln!(out, "final,all,{},{},{},{}", last.mean_reward, std, self.algo, last.clip_frac);
        }
        out
    }
}

/// Group-relative policy optimization with plain SGD.
///
/// Each step freezes a snapshot, rolls out groups on a random scenario
/// minibatch against it, and descends the summed clipped surrogate.
pub fn train(
    p0: &PolicyParams,
    scenarios: &[Scenario],
    cfg: &TrainConfig,
    env: &RewardEnv,
) -> Result<(PolicyParams, TrainHistory), OptimError> {
    if scenarios.is_empty() {
        return Err(OptimError::Contract("no training scenarios".into()));
    }
    if cfg.group_size < 2 {
        return Err(OptimError::Contract(format!("group size {} < 2", cfg.group_size)));
    }
    let mut params = p0.clone();
    let mut history = TrainHistory { algo: cfg.algo, records: Vec::with_capacity(cfg.steps) };
    let batch = cfg.batch_size.clamp(1, scenarios.len());

    for step in 0..cfg.steps {
        let snapshot = params.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x7261_696e, step as u64]));
        let mut picked = sample_indices(&mut rng, scenarios.len(), batch).into_vec();
        picked.sort_unstable();

        let groups: Vec<RolloutGroup> = picked
            .par_iter()
            .map(|&i| {
                let sc = &scenarios[i];
                let seed = derive_seed(cfg.seed, &[step as u64, i as u64]);
                rollout_group(&snapshot, sc, cfg.group_size, cfg.temperature, sc.token_count(), seed, env)
            })
            .collect();
        let advantages: Vec<Vec<f64>> = groups.iter().map(|g| cfg.algo.advantages(&g.total_rewards())).collect();

        let mut loss = 0.0;
        let mut grad_norm = 0.0;
        let mut clipped = 0usize;
        let mut tokens = 0usize;
        for update in 0..cfg.updates_per_batch.max(1) {
            let outs = groups
                .par_iter()
                .zip(advantages.par_iter())
                .map(|(g, a)| surrogate_loss_and_grad(&params, g, a, &cfg.clip))
                .collect::<Result<Vec<_>, _>>()?;
            let mut grad = params.zeros_like();
            let mut step_loss = 0.0;
            for (g, o) in groups.iter().zip(&outs) {
                if !o.loss.is_finite() {
                    return Err(OptimError::NonFinite {
                        step,
                        detail: format!("surrogate loss {} on scenario {}", o.loss, g.scenario_id),
                    });
                }
                step_loss += o.loss;
                grad.axpy(1.0, &o.grad);
                if update == 0 {
                    clipped += o.clipped_tokens;
                    tokens += o.tokens;
                }
            }
            let norm = grad.norm();
            if !norm.is_finite() {
                return Err(OptimError::NonFinite { step, detail: format!("gradient norm {norm}") });
            }
            if let Some(max) = cfg.max_grad_norm {
                if norm > max {
                    grad.scale(max / norm);
                }
            }
            params.axpy(-cfg.lr, &grad);
            if update == 0 {
                loss = step_loss;
                grad_norm = norm;
            }
        }

        let all: Vec<f64> = groups.iter().flat_map(|g| g.total_rewards()).collect();
        history.records.push(StepRecord {
            step,
            groups: groups
                .iter()
                .map(|g| GroupSummary { scenario_id: g.scenario_id.clone(), group_mean: g.group_mean, group_std: g.group_std })
                .collect(),
            mean_reward: all.iter().sum::<f64>() / all.len() as f64,
            clip_frac: if tokens > 0 { clipped as f64 / tokens as f64 } else { 0.0 },
            loss,
            grad_norm,
        });
        log::debug!("step {step} {} loss {loss:.4} |g| {grad_norm:.4}", cfg.algo);
    }
    Ok((params, history))
}
