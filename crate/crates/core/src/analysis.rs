//! Reward-landscape diagnostics: per-scenario group statistics, their
//! histogram over group mean, the polarization check, variance-tertile
//! deltas and the algorithm comparison table.
//!
//! Group statistics are taken over the dataset reward (the PDM composite or
//! normalized rater score), the quantity whose landscape is being studied.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::derive_seed;
use crate::optim::{mean, population_std, rollout_group, Algo, RewardEnv};
use crate::policy::PolicyParams;
use crate::sim::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("scenario sets differ: {0}")]
    ScenarioMismatch(String),
    #[error("no statistics supplied")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStat {
    pub scenario_id: String,
    pub group_mean: f64,
    pub group_std: f64,
    pub step: usize,
}

pub const STATS_CSV_HEADER: &str = "step,scenario_id,group_mean,group_std";

pub fn stats_csv(stats: &[GroupStat]) -> String {
    let mut out = format!("{STATS_CSV_HEADER}\n");
    for s in stats {
        let _ = writeln!(out, "{},{},{},{}", s.step, s.scenario_id, s.group_mean, s.group_std);
    }
    out
}

/// Per-rollout reward rows of a stats collection.
pub type RewardRows = Vec<String>;

/// Rolls out `g` samples per scenario and summarizes each group's dataset
/// reward. Also returns the per-rollout reward CSV rows, in scenario order.
pub fn collect_stats(
    policy: &PolicyParams,
    scenarios: &[Scenario],
    g: usize,
    temperature: f64,
    seed: u64,
    step: usize,
    env: &RewardEnv,
) -> (Vec<GroupStat>, RewardRows) {
    let groups: Vec<_> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| rollout_group(policy, sc, g, temperature, sc.token_count(), derive_seed(seed, &[i as u64]), env))
        .collect();
    let mut rows = Vec::with_capacity(scenarios.len() * g);
    let stats = groups
        .iter()
        .map(|grp| {
            for (i, r) in grp.rollouts.iter().enumerate() {
                rows.push(r.reward.csv_row(&grp.scenario_id, i));
            }
            let d = grp.dataset_rewards();
            GroupStat { scenario_id: grp.scenario_id.clone(), group_mean: mean(&d), group_std: population_std(&d), step }
        })
        .collect();
    (stats, rows)
}

/// Mean of the group means.
pub fn mean_group_mean(stats: &[GroupStat]) -> f64 {
    let mut m: Vec<f64> = stats.iter().map(|s| s.group_mean).collect();
    m.sort_by(f64::total_cmp);
    m.iter().sum::<f64>() / m.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinProfile {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Mean group std of each bin; `None` for empty bins.
    pub mean_std: Vec<Option<f64>>,
}

impl BinProfile {
    pub const CSV_HEADER: &'static str = "bin_lo,bin_hi,count,mean_std";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for i in 0..self.counts.len() {
            let ms = self.mean_std[i].map_or(String::new(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{}", self.edges[i], self.edges[i + 1], self.counts[i], ms);
        }
        out
    }
}

/// Histogram of group means over `n_bins` uniform bins on [0, 1].
pub fn bin_profile(stats: &[GroupStat], n_bins: usize) -> BinProfile {
    let n_bins = n_bins.max(1);
    let edges: Vec<f64> = (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for s in stats {
        let b = ((s.group_mean * n_bins as f64).floor() as usize).min(n_bins - 1);
        members[b].push(s.group_std);
    }
    let counts = members.iter().map(Vec::len).collect();
    let mean_std = members
        .iter_mut()
        .map(|m| {
            if m.is_empty() {
                return None;
            }
            m.sort_by(f64::total_cmp);
            Some(m.iter().sum::<f64>() / m.len() as f64)
        })
        .collect();
    BinProfile { edges, counts, mean_std }
}

/// Group-mean regions of the polarization check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationRegions {
    pub low: (f64, f64),
    pub mid: (f64, f64),
    pub high: (f64, f64),
}

impl Default for PolarizationRegions {
    fn default() -> Self {
        PolarizationRegions { low: (0.0, 0.15), mid: (0.2, 0.65), high: (0.8, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationReport {
    /// `None` when either region holds no scenarios.
    pub passed: Option<bool>,
    pub extreme_mean_std: Option<f64>,
    pub extreme_count: usize,
    pub mid_mean_std: Option<f64>,
    pub mid_count: usize,
}

impl PolarizationReport {
    pub fn summary(&self) -> String {
        let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        let verdict = match self.passed {
            Some(true) => "polarized",
            Some(false) => "not polarized",
            None => "indeterminate",
        };
        format!(
            "{verdict}: mean std {} over {} extreme-mean scenarios vs {} over {} mid-mean scenarios",
            f(self.extreme_mean_std),
            self.extreme_count,
            f(self.mid_mean_std),
            self.mid_count
        )
    }
}

/// Passes when groups with extreme means have strictly lower average spread
/// than groups with intermediate means. Only bins lying wholly inside a
/// region count toward it.
pub fn polarization_check(profile: &BinProfile, regions: &PolarizationRegions) -> PolarizationReport {
    let tol = 1e-12;
    let pool = |ranges: &[(f64, f64)]| {
        let (mut n, mut acc) = (0usize, 0.0);
        for i in 0..profile.counts.len() {
            let (lo, hi) = (profile.edges[i], profile.edges[i + 1]);
            let inside = ranges.iter().any(|&(a, b)| lo >= a - tol && hi <= b + tol);
            if let (true, Some(m)) = (inside, profile.mean_std[i]) {
                n += profile.counts[i];
                acc += m * profile.counts[i] as f64;
            }
        }
        (n, (n > 0).then(|| acc / n as f64))
    };
    let (extreme_count, extreme_mean_std) = pool(&[regions.low, regions.high]);
    let (mid_count, mid_mean_std) = pool(&[regions.mid]);
    let passed = match (extreme_mean_std, mid_mean_std) {
        (Some(e), Some(m)) => Some(e < m),
        _ => None,
    };
    PolarizationReport { passed, extreme_mean_std, extreme_count, mid_mean_std, mid_count }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tertile {
    pub label: &'static str,
    pub scenario_ids: Vec<String>,
    pub mean_before: f64,
    pub mean_after: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TertileReport {
    pub tertiles: [Tertile; 3],
}

impl TertileReport {
    pub const CSV_HEADER: &'static str = "tertile,count,std_lo,std_hi,mean_before,mean_after,delta";

    pub fn to_csv(&self, before: &[GroupStat]) -> String {
        let std_of: HashMap<&str, f64> = before.iter().map(|s| (s.scenario_id.as_str(), s.group_std)).collect();
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for t in &self.tertiles {
            let stds: Vec<f64> = t.scenario_ids.iter().map(|id| std_of[id.as_str()]).collect();
            let lo = stds.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = stds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(out, "{},{},{},{},{},{},{}", t.label, t.scenario_ids.len(), lo, hi, t.mean_before, t.mean_after, t.delta);
        }
        out
    }
}

/// Splits scenarios into low/mid/high tertiles of before-training group
/// std (ties broken by id; remainders go to the lower tertiles) and reports
/// the change in mean group mean within each.
pub fn tertile_report(before: &[GroupStat], after: &[GroupStat]) -> Result<TertileReport, AnalysisError> {
    if before.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let after_by_id: HashMap<&str, f64> = after.iter().map(|s| (s.scenario_id.as_str(), s.group_mean)).collect();
    if after_by_id.len() != after.len() || after.len() != before.len() {
        return Err(AnalysisError::ScenarioMismatch(format!("{} vs {} scenarios", before.len(), after.len())));
    }
    if let Some(s) = before.iter().find(|s| !after_by_id.contains_key(s.scenario_id.as_str())) {
        return Err(AnalysisError::ScenarioMismatch(format!("{} missing after training", s.scenario_id)));
    }
    let mut order: Vec<&GroupStat> = before.iter().collect();
    order.sort_by(|a, b| a.group_std.total_cmp(&b.group_std).then_with(|| a.scenario_id.cmp(&b.scenario_id)));
    let n = order.len();
    let sizes = [n / 3 + usize::from(n % 3 > 0), n / 3 + usize::from(n % 3 > 1), n / 3];
    let mut start = 0;
    let labels = ["low", "mid", "high"];
    let tertiles = [0, 1, 2].map(|k| {
        let part = &order[start..start + sizes[k]];
        start += sizes[k];
        let mut b: Vec<f64> = part.iter().map(|s| s.group_mean).collect();
        let mut a: Vec<f64> = part.iter().map(|s| after_by_id[s.scenario_id.as_str()]).collect();
        b.sort_by(f64::total_cmp);
        a.sort_by(f64::total_cmp);
        let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let (mb, ma) = (avg(&b), avg(&a));
        Tertile {
            label: labels[k],
            scenario_ids: part.iter().map(|s| s.scenario_id.clone()).collect(),
            mean_before: mb,
            mean_after: ma,
            delta: ma - mb,
        }
    });
    Ok(TertileReport { tertiles })
}

/// `(final − initial) / initial`; zero when nothing changed.
pub fn relative_gain(initial: f64, fin: f64) -> f64 {
    if fin == initial {
        0.0
    } else {
        (fin - initial) / initial
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub algo: Algo,
    pub initial: f64,
    pub fin: f64,
    pub gain: f64,
}

impl ComparisonRow {
    pub fn new(algo: Algo, initial: f64, fin: f64) -> Self {
        ComparisonRow { algo, initial, fin, gain: relative_gain(initial, fin) }
    }

    /// Row built from the mean group means of two stat sets.
    pub fn from_stats(algo: Algo, initial: &[GroupStat], fin: &[GroupStat]) -> Self {
        Self::new(algo, mean_group_mean(initial), mean_group_mean(fin))
    }
}

pub const COMPARISON_CSV_HEADER: &str = "algo,initial_mean,final_mean,relative_gain";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{COMPARISON_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.algo, r.initial, r.fin, r.gain);
    }
    out
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{:<8} {:>12} {:>12} {:>10}\n", "algo", "initial", "final", "gain");
    for r in rows {
        let _ = writeln!(out, "{:<8} {:>12.6} {:>12.6} {:>9.2}%", r.algo.to_string(), r.initial, r.fin, 100.0 * r.gain);
    }
    out
}
