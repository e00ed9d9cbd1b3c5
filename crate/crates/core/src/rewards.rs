//! Driving rewards.
//!
//! The dataset reward is either the PDM composite of simulator measurements
//! or the normalized rater-feedback score against rated references. Two
//! small shaping terms check that the output text parses and has the right
//! number of tokens; the total is their sum over 1.5.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Trajectory;
use crate::sim::{RaterRef, SimConfig, SimOutcome};
use crate::tokenizer::{parse, TokenSequence};

/// Value of a satisfied format or length check.
pub const SHAPING_REWARD: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("no rater references supplied")]
    NoReferences,
    #[error("trajectory does not reach checkpoint t = {0} s")]
    ShortTrajectory(f64),
    #[error("{name} = {value} outside its allowed range")]
    OutOfRange { name: &'static str, value: f64 },
}

/// Sub-scores of the PDM composite, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdmComponents {
    pub nc: f64,
    pub dac: f64,
    pub ttc: f64,
    pub comfort: f64,
    pub ep: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DacMode {
    /// Any off-road sample zeroes the score.
    #[default]
    Binary,
    /// Score is the on-road fraction.
    Fractional,
}

pub fn pdm_components(out: &SimOutcome, cfg: &SimConfig, dac: DacMode) -> PdmComponents {
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    PdmComponents {
        nc: indicator(!out.collided),
        dac: match dac {
            DacMode::Binary => indicator(out.offroad_fraction == 0.0),
            DacMode::Fractional => 1.0 - out.offroad_fraction,
        },
        ttc: indicator(out.min_ttc >= cfg.ttc_threshold),
        comfort: indicator(out.is_comfortable(cfg)),
        ep: out.progress_ratio,
    }
}

/// `NC · DAC · (5·TTC + 2·C + 5·EP) / 12`.
pub fn pdm_score(c: &PdmComponents) -> f64 {
    c.nc * c.dac * (5.0 * c.ttc + 2.0 * c.comfort + 5.0 * c.ep) / 12.0
}

/// Trust-region shape of the rater-feedback score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfsConfig {
    pub lng_min: f64,
    pub lng_per_speed: f64,
    pub lat_min: f64,
    pub lat_per_speed: f64,
    /// Score reached at twice the trust-region threshold.
    pub decayed_score: f64,
    pub floor: f64,
    pub checkpoints: Vec<f64>,
}

impl Default for RfsConfig {
    fn default() -> Self {
        RfsConfig {
            lng_min: 1.0,
            lng_per_speed: 0.4,
            lat_min: 0.5,
            lat_per_speed: 0.15,
            decayed_score: 3.0,
            floor: 4.0,
            checkpoints: vec![3.0, 5.0],
        }
    }
}

impl RfsConfig {
    /// Longitudinal and lateral trust-region half-sizes at speed `v`.
    pub fn thresholds(&self, v: f64) -> (f64, f64) {
        (self.lng_min.max(self.lng_per_speed * v), self.lat_min.max(self.lat_per_speed * v))
    }
}

/// Rater-feedback score of `pred` against rated references.
///
/// At each checkpoint every reference scores its label when the prediction
/// lies within its trust region (deviations measured in the reference's
/// heading frame), decaying linearly to `decayed_score` at twice the
/// threshold. The best reference is floored and the checkpoints averaged.
pub fn rfs(pred: &Trajectory, refs: &[RaterRef], speed: f64, cfg: &RfsConfig) -> Result<f64, RewardError> {
    if refs.is_empty() {
        return Err(RewardError::NoReferences);
    }
    let (tau_lng, tau_lat) = cfg.thresholds(speed);
    let mut total = 0.0;
    for &t in &cfg.checkpoints {
        let p = pred.pose_at(t).ok_or(RewardError::ShortTrajectory(t))?;
        let mut best = f64::NEG_INFINITY;
        for r in refs {
            let q = r.trajectory.pose_at(t).ok_or(RewardError::ShortTrajectory(t))?;
            let dev = q.relative(&p);
            let excess = (dev.x.abs() / tau_lng).max(dev.y.abs() / tau_lat);
            let score = if excess <= 1.0 {
                r.score
            } else {
                let e = excess.min(2.0);
                r.score - (r.score - cfg.decayed_score) * (e - 1.0)
            };
            best = best.max(score);
        }
        total += best.max(cfg.floor);
    }
    Ok(total / cfg.checkpoints.len() as f64)
}

/// `(max(s, 4) − 4) / 6`.
pub fn normalized_rfs(s: f64) -> f64 {
    (s.max(4.0) - 4.0) / 6.0
}

pub fn format_reward(text: &str) -> f64 {
    if parse(text).is_ok() {
        SHAPING_REWARD
    } else {
        0.0
    }
}

pub fn length_reward(ids: &TokenSequence, expected: usize) -> f64 {
    if ids.len() == expected {
        SHAPING_REWARD
    } else {
        0.0
    }
}

/// `(rf + rl + rd) / 1.5`.
pub fn total_reward(rf: f64, rl: f64, rd: f64) -> Result<f64, RewardError> {
    for (name, v) in [("r_format", rf), ("r_length", rl)] {
        if v != 0.0 && v != SHAPING_REWARD {
            return Err(RewardError::OutOfRange { name, value: v });
        }
    }
    if !(0.0..=1.0).contains(&rd) {
        return Err(RewardError::OutOfRange { name: "r_dataset", value: rd });
    }
    Ok((rf + rl + rd) / 1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_length: f64,
    pub r_dataset: f64,
    pub r_total: f64,
}

impl RewardBreakdown {
    pub fn new(r_format: f64, r_length: f64, r_dataset: f64) -> Result<Self, RewardError> {
        Ok(RewardBreakdown { r_format, r_length, r_dataset, r_total: total_reward(r_format, r_length, r_dataset)? })
    }

    pub const CSV_HEADER: &'static str = "scenario_id,rollout_idx,r_format,r_length,r_dataset,r_total";

    pub fn csv_row(&self, scenario_id: &str, rollout_idx: usize) -> String {
        format!(
            "{scenario_id},{rollout_idx},{},{},{},{}",
            self.r_format, self.r_length, self.r_dataset, self.r_total
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Waypoint, DT};
    use approx::assert_abs_diff_eq;

    fn clean() -> SimOutcome {
        SimOutcome {
            collided: false,
            collision_time: None,
            min_ttc: f64::INFINITY,
            offroad_fraction: 0.0,
            progress: 30.0,
            progress_ratio: 1.0,
            max_accel: 0.5,
            max_jerk: 0.5,
        }
    }

    fn all(v: f64) -> PdmComponents {
        PdmComponents { nc: v, dac: v, ttc: v, comfort: v, ep: v }
    }

    #[test]
    fn components_map_measurements() {
        let cfg = SimConfig::default();
        assert_eq!(pdm_components(&clean(), &cfg, DacMode::Binary), all(1.0));
        let hit = SimOutcome { collided: true, collision_time: Some(1.0), min_ttc: 0.0, ..clean() };
        let c = pdm_components(&hit, &cfg, DacMode::Binary);
        assert_eq!((c.nc, c.ttc), (0.0, 0.0));
        let half = SimOutcome { progress_ratio: 0.5, ..clean() };
        assert_eq!(pdm_components(&half, &cfg, DacMode::Binary), PdmComponents { ep: 0.5, ..all(1.0) });
        let off = SimOutcome { offroad_fraction: 0.25, ..clean() };
        assert_eq!(pdm_components(&off, &cfg, DacMode::Binary).dac, 0.0);
        assert_eq!(pdm_components(&off, &cfg, DacMode::Fractional).dac, 0.75);
        let jerky = SimOutcome { max_jerk: 9.0, ..clean() };
        assert_eq!(pdm_components(&jerky, &cfg, DacMode::Binary).comfort, 0.0);
    }

    #[test]
    fn pdm_examples() {
        assert_eq!(pdm_score(&all(1.0)), 1.0);
        assert_eq!(pdm_score(&PdmComponents { nc: 0.0, ..all(1.0) }), 0.0);
        let c = PdmComponents { nc: 1.0, dac: 1.0, ttc: 0.5, comfort: 1.0, ep: 0.5 };
        assert_abs_diff_eq!(pdm_score(&c), 7.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn normalized_rfs_examples() {
        assert_eq!(normalized_rfs(10.0), 1.0);
        assert_eq!(normalized_rfs(4.0), 0.0);
        assert_eq!(normalized_rfs(3.0), 0.0);
        assert_eq!(normalized_rfs(7.0), 0.5);
    }

    #[test]
    fn shaping_rewards() {
        assert_eq!(format_reward("TRAJ_0001 TRAJ_0002"), 0.25);
        assert_eq!(format_reward("TRAJ_1"), 0.0);
        assert_eq!(format_reward(""), 0.0);
        assert_eq!(length_reward(&TokenSequence::new(vec![1; 8]), 8), 0.25);
        assert_eq!(length_reward(&TokenSequence::new(vec![1; 7]), 8), 0.0);
        assert_eq!(length_reward(&TokenSequence::new(vec![1; 10]), 10), 0.25);
    }

    #[test]
    fn total_reward_examples() {
        assert_eq!(total_reward(0.25, 0.25, 1.0).unwrap(), 1.0);
        assert_eq!(total_reward(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(total_reward(0.25, 0.25, 0.5).unwrap(), 1.0 / 1.5, epsilon = 1e-15);
        assert!(total_reward(0.3, 0.25, 0.5).is_err());
        assert!(total_reward(0.25, 0.25, 1.5).is_err());
        assert!(total_reward(0.25, 0.25, f64::NAN).is_err());
    }

    fn straight(speed: f64, y: f64) -> Trajectory {
        Trajectory::new((0..50).map(|k| Waypoint::new(speed * k as f64 * DT, y, 0.0)).collect())
    }

    fn refs() -> Vec<RaterRef> {
        vec![
            RaterRef { trajectory: straight(8.0, 0.0), score: 10.0 },
            RaterRef { trajectory: straight(5.6, 0.0), score: 7.0 },
            RaterRef { trajectory: straight(6.8, 1.5), score: 4.0 },
        ]
    }

    #[test]
    fn rfs_identical_and_far() {
        let cfg = RfsConfig::default();
        assert_eq!(rfs(&straight(8.0, 0.0), &refs(), 8.0, &cfg).unwrap(), 10.0);
        assert_eq!(rfs(&straight(8.0, 30.0), &refs(), 8.0, &cfg).unwrap(), 4.0);
        assert_eq!(rfs(&straight(8.0, 0.0), &[], 8.0, &cfg), Err(RewardError::NoReferences));
    }

    #[test]
    fn rfs_checkpoint_floor_then_average() {
        // On the score-7 ref at 3 s, then far from everything at 5 s.
        let cfg = RfsConfig::default();
        let refs = refs();
        let mut w = refs[1].trajectory.waypoints.clone();
        for p in w.iter_mut().skip(31) {
            p.y = 30.0;
        }
        assert_eq!(rfs(&Trajectory::new(w), &refs, 8.0, &cfg).unwrap(), 5.5);
    }

    #[test]
    fn rfs_decays_linearly_outside_region() {
        let cfg = RfsConfig::default();
        let only = vec![RaterRef { trajectory: straight(0.0, 0.0), score: 10.0 }];
        // speed 0: lateral threshold 0.5 m; 0.75 m is 1.5× → 10 − 7·0.5
        let pred = straight(0.0, 0.75);
        assert_abs_diff_eq!(rfs(&pred, &only, 0.0, &cfg).unwrap(), 6.5, epsilon = 1e-12);
    }
}
