use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Groups whose reward spread is below this get zero normalized advantage.
pub const EPS_STD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    /// Advantages divided by the group's standard deviation.
    Grpo,
    /// Advantages only centered.
    Drgrpo,
}

impl Algo {
    pub fn advantages(self, rewards: &[f64]) -> Vec<f64> {
        match self {
            Algo::Grpo => grpo_advantage(rewards),
            Algo::Drgrpo => drgrpo_advantage(rewards),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Grpo => "grpo",
            Algo::Drgrpo => "drgrpo",
        })
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "grpo" => Ok(Algo::Grpo),
            "drgrpo" | "dr-grpo" | "dr.grpo" => Ok(Algo::Drgrpo),
            other => Err(format!("unknown algorithm {other:?} (expected grpo or drgrpo)")),
        }
    }
}

/// Mean taken about the first element, so constant inputs return that value exactly.
pub fn mean(x: &[f64]) -> f64 {
    let Some(&x0) = x.first() else { return f64::NAN };
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// `(r_i − mean) / std`, or all zeros when `std < EPS_STD`.
pub fn grpo_advantage(rewards: &[f64]) -> Vec<f64> {
    let m = mean(rewards);
    let s = population_std(rewards);
    if s < EPS_STD {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - m) / s).collect()
}

/// `r_i − mean`.
pub fn drgrpo_advantage(rewards: &[f64]) -> Vec<f64> {
    let m = mean(rewards);
    rewards.iter().map(|r| r - m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_groups_are_exactly_zero() {
        for v in [0.1, 0.7, 0.3333333333333333, 1e-3, 12.34] {
            let r = vec![v; 8];
            assert!(drgrpo_advantage(&r).iter().all(|a| *a == 0.0));
            assert!(grpo_advantage(&r).iter().all(|a| *a == 0.0));
        }
    }

    #[test]
    fn two_point_group() {
        assert_eq!(grpo_advantage(&[0.0, 1.0]), vec![-1.0, 1.0]);
        assert_eq!(drgrpo_advantage(&[0.0, 1.0]), vec![-0.5, 0.5]);
    }

    #[test]
    fn constant_group_is_zero() {
        assert_eq!(grpo_advantage(&[0.7; 4]), vec![0.0; 4]);
        assert_eq!(drgrpo_advantage(&[0.7; 4]), vec![0.0; 4]);
    }

    #[test]
    fn algo_parses() {
        assert_eq!("GRPO".parse::<Algo>().unwrap(), Algo::Grpo);
        assert_eq!("drgrpo".parse::<Algo>().unwrap(), Algo::Drgrpo);
        assert!("ppo".parse::<Algo>().is_err());
    }
}
