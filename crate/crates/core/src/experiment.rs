//! End-to-end experiment: tokenizer fitting, stratified scenario set, weak
//! supervised fit, RL fine-tuning and reports.
//!
//! Every random draw is derived from the config seed, and parallel results
//! are gathered in scenario order, so a run directory is a pure function of
//! its `config.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    bin_profile, collect_stats, comparison_csv, comparison_table, mean_group_mean, polarization_check, stats_csv,
    tertile_report, AnalysisError, ComparisonRow, GroupStat, PolarizationRegions, PolarizationReport, TertileReport,
};
use crate::corpus::{corpus_segments, generate_corpus, mean_endpoint_error};
use crate::derive_seed;
use crate::geometry::Trajectory;
use crate::optim::{train, Algo, ClipConfig, OptimError, RewardEnv, TrainConfig, TrainHistory};
use crate::policy::{features, sft_fit, PolicyError, PolicyParams, ScenarioFeatures, SftConfig, FEATURE_DIM};
use crate::rewards::RewardBreakdown;
use crate::sim::{generate_scenario_with, load_scenarios, save_scenarios, Difficulty, Scenario, ScenarioStyle, SimConfig, SimError};
use crate::tokenizer::{encode, fit_codebook, Codebook, TokenSequence, TokenizerError};

pub const CONFIG_SCHEMA: &str = "experiment-v1";

const TAG_CORPUS: u64 = 1;
const TAG_KMEANS: u64 = 2;
const TAG_SCENARIOS: u64 = 3;
const TAG_DEMOS: u64 = 4;
const TAG_INIT: u64 = 5;
const TAG_SFT: u64 = 6;
const TAG_RL: u64 = 7;
const TAG_STATS: u64 = 8;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("run directories disagree: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ExperimentError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSettings {
    pub vocab: usize,
    pub corpus_size: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftSettings {
    /// Demonstrations drawn from each of the easy and turn strata.
    pub demos_per_stratum: usize,
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlSettings {
    pub algo: Algo,
    pub group_size: usize,
    pub temperature: f64,
    pub eval_temperature: f64,
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub eps_low: f64,
    pub eps_high: f64,
    pub updates_per_batch: usize,
    pub max_grad_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub seed: u64,
    pub tokenizer: TokenizerSettings,
    pub scenarios_per_stratum: usize,
    pub style: ScenarioStyle,
    pub sim: SimConfig,
    pub sft: SftSettings,
    pub rl: RlSettings,
    pub bins: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: CONFIG_SCHEMA.into(),
            seed: 0,
            tokenizer: TokenizerSettings { vocab: 128, corpus_size: 2000, max_iters: 50 },
            scenarios_per_stratum: 80,
            style: ScenarioStyle::Navsim,
            sim: SimConfig::default(),
            sft: SftSettings { demos_per_stratum: 120, steps: 150, lr: 2.0, batch_size: 16, hidden_dim: 16, init_scale: 0.1 },
            rl: RlSettings {
                algo: Algo::Drgrpo,
                group_size: 8,
                temperature: 1.0,
                eval_temperature: 0.01,
                steps: 200,
                lr: 0.004,
                batch_size: 32,
                eps_low: 0.2,
                eps_high: 0.1,
                updates_per_batch: 4,
                max_grad_norm: None,
            },
            bins: 20,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.schema != CONFIG_SCHEMA {
            return bad(&format!("unsupported schema {:?}", self.schema));
        }
        if self.tokenizer.vocab == 0 || self.tokenizer.vocab > 2048 {
            return bad("vocab must be in 1..=2048");
        }
        if self.scenarios_per_stratum == 0 {
            return bad("scenarios_per_stratum must be positive");
        }
        if self.rl.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if !(self.rl.temperature > 0.0 && self.rl.eval_temperature > 0.0) {
            return bad("temperatures must be positive");
        }
        for e in [self.rl.eps_low, self.rl.eps_high] {
            if !(e > 0.0 && e < 1.0) {
                return bad("clip epsilons must be in (0, 1)");
            }
        }
        if self.sft.demos_per_stratum == 0 {
            return bad("demos_per_stratum must be positive");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn train_config(&self, algo: Algo) -> TrainConfig {
        TrainConfig {
            algo,
            steps: self.rl.steps,
            lr: self.rl.lr,
            clip: ClipConfig { eps_low: self.rl.eps_low, eps_high: self.rl.eps_high },
            group_size: self.rl.group_size,
            temperature: self.rl.temperature,
            batch_size: self.rl.batch_size,
            updates_per_batch: self.rl.updates_per_batch,
            max_grad_norm: self.rl.max_grad_norm,
            seed: derive_seed(self.seed, &[TAG_RL]),
        }
    }
}

/// Codebook plus its fit diagnostics.
#[derive(Debug, Clone)]
pub struct TokenizerFit {
    pub codebook: Codebook,
    pub mean_endpoint_error: f64,
    pub objective: Vec<f64>,
    pub segments: usize,
}

impl TokenizerFit {
    pub fn summary(&self) -> String {
        format!(
            "K={} segments={} iterations={} objective={:.6} mean_endpoint_error={:.6} m",
            self.codebook.len(),
            self.segments,
            self.objective.len(),
            self.objective.last().copied().unwrap_or(0.0),
            self.mean_endpoint_error
        )
    }
}

pub fn fit_tokenizer(cfg: &ExperimentConfig) -> Result<TokenizerFit, ExperimentError> {
    fit_tokenizer_k(cfg, cfg.tokenizer.vocab)
}

/// Fits a `k`-prototype codebook on the config's corpus.
pub fn fit_tokenizer_k(cfg: &ExperimentConfig, k: usize) -> Result<TokenizerFit, ExperimentError> {
    let corpus = generate_corpus(cfg.tokenizer.corpus_size, cfg.style.horizon(), derive_seed(cfg.seed, &[TAG_CORPUS]));
    let segments = corpus_segments(&corpus)?;
    let fit = fit_codebook(&segments, k, derive_seed(cfg.seed, &[TAG_KMEANS]), cfg.tokenizer.max_iters)?;
    let err = mean_endpoint_error(&corpus, &fit.codebook)?;
    Ok(TokenizerFit { codebook: fit.codebook, mean_endpoint_error: err, objective: fit.objective, segments: segments.len() })
}

/// `scenarios_per_stratum` scenarios of each difficulty, easy first.
pub fn build_scenarios(cfg: &ExperimentConfig) -> Vec<Scenario> {
    stratified(cfg, TAG_SCENARIOS, &Difficulty::ALL, cfg.scenarios_per_stratum)
}

fn stratified(cfg: &ExperimentConfig, tag: u64, strata: &[Difficulty], per: usize) -> Vec<Scenario> {
    use rayon::prelude::*;
    let jobs: Vec<(Difficulty, u64)> = strata
        .iter()
        .flat_map(|&d| (0..per).map(move |i| (d, i as u64)))
        .collect();
    jobs.par_iter()
        .map(|&(d, i)| {
            let seed = derive_seed(cfg.seed, &[tag, d as u64, i]) >> 16;
            generate_scenario_with(seed, d, cfg.style, &cfg.sim)
        })
        .collect()
}

/// Expert demonstrations from the easy and turn strata only, on scenarios
/// disjoint from the training set.
pub fn build_demos(cfg: &ExperimentConfig, cb: &Codebook) -> Result<Vec<(ScenarioFeatures, TokenSequence)>, ExperimentError> {
    let scenarios = stratified(cfg, TAG_DEMOS, &[Difficulty::Easy, Difficulty::Turn], cfg.sft.demos_per_stratum);
    scenarios
        .iter()
        .map(|sc| Ok((features(sc), encode(&sc.expert, cb)?)))
        .collect()
}

/// The weak supervised policy.
pub fn sft_policy(cfg: &ExperimentConfig, cb: &Codebook) -> Result<PolicyParams, ExperimentError> {
    let demos = build_demos(cfg, cb)?;
    let p0 = PolicyParams::init(cb.len(), cfg.sft.hidden_dim, FEATURE_DIM, cfg.sft.init_scale, derive_seed(cfg.seed, &[TAG_INIT]));
    let sft = SftConfig {
        steps: cfg.sft.steps,
        lr: cfg.sft.lr,
        batch_size: cfg.sft.batch_size,
        seed: derive_seed(cfg.seed, &[TAG_SFT]),
    };
    Ok(sft_fit(&p0, &demos, &sft)?.params)
}

/// State shared by runs of either algorithm.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub tokenizer: TokenizerFit,
    pub scenarios: Vec<Scenario>,
    pub env: RewardEnv,
    pub sft: PolicyParams,
    pub initial_stats: Vec<GroupStat>,
    pub initial_rewards: Vec<String>,
    pub initial_eval: f64,
}

#[derive(Debug, Clone)]
pub struct RlRun {
    pub algo: Algo,
    pub policy: PolicyParams,
    pub history: TrainHistory,
    pub final_stats: Vec<GroupStat>,
    pub final_rewards: Vec<String>,
    pub final_eval: f64,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        let tokenizer = fit_tokenizer(cfg)?;
        let scenarios = build_scenarios(cfg);
        let mut env = RewardEnv::new(tokenizer.codebook.clone());
        env.sim = cfg.sim;
        let sft = sft_policy(cfg, &tokenizer.codebook)?;
        let (initial_stats, initial_rewards) = stats_for(cfg, &sft, &scenarios, &env, 0);
        let initial_eval = eval_mean(cfg, &sft, &scenarios, &env);
        Ok(Prepared { config: cfg.clone(), tokenizer, scenarios, env, sft, initial_stats, initial_rewards, initial_eval })
    }

    pub fn polarization(&self) -> PolarizationReport {
        polarization_check(&bin_profile(&self.initial_stats, self.config.bins), &PolarizationRegions::default())
    }

    pub fn run_rl(&self, algo: Algo) -> Result<RlRun, ExperimentError> {
        let cfg = &self.config;
        let (policy, history) = train(&self.sft, &self.scenarios, &cfg.train_config(algo), &self.env)?;
        let (final_stats, final_rewards) = stats_for(cfg, &policy, &self.scenarios, &self.env, cfg.rl.steps);
        let final_eval = eval_mean(cfg, &policy, &self.scenarios, &self.env);
        Ok(RlRun { algo, policy, history, final_stats, final_rewards, final_eval })
    }

    pub fn tertiles(&self, run: &RlRun) -> Result<TertileReport, ExperimentError> {
        Ok(tertile_report(&self.initial_stats, &run.final_stats)?)
    }

    /// Headline row: mean dataset reward of near-greedy decoding at the
    /// evaluation temperature, before and after RL.
    pub fn comparison(&self, run: &RlRun) -> ComparisonRow {
        ComparisonRow::new(run.algo, self.initial_eval, run.final_eval)
    }

    /// Same comparison on the group means sampled at rollout temperature.
    pub fn rollout_comparison(&self, run: &RlRun) -> ComparisonRow {
        ComparisonRow::from_stats(run.algo, &self.initial_stats, &run.final_stats)
    }

    /// Writes every artifact of one run into the config's output directory.
    pub fn write_run(&self, run: &RlRun) -> Result<(), ExperimentError> {
        let cfg = &self.config;
        let dir = cfg.output_dir.as_path();
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut stored = cfg.clone();
        stored.rl.algo = run.algo;
        write(&dir.join("config.json"), stored.to_json())?;
        write(&dir.join("codebook.txt"), self.tokenizer.codebook.to_text())?;
        save_scenarios(&dir.join("scenarios.json"), &self.scenarios)?;
        write(&dir.join("policy_sft.txt"), self.sft.to_text())?;
        write(&dir.join("policy_final.txt"), run.policy.to_text())?;
        write(&dir.join("history.csv"), run.history.to_csv())?;
        write(&dir.join("stats_initial.csv"), stats_csv(&self.initial_stats))?;
        write(&dir.join("stats_final.csv"), stats_csv(&run.final_stats))?;
        write(&dir.join("bins.csv"), bin_profile(&self.initial_stats, cfg.bins).to_csv())?;
        write(&dir.join("bins_final.csv"), bin_profile(&run.final_stats, cfg.bins).to_csv())?;
        write(&dir.join("tertiles.csv"), self.tertiles(run)?.to_csv(&self.initial_stats))?;
        write(&dir.join("rewards_initial.csv"), reward_csv(&self.initial_rewards))?;
        write(&dir.join("rewards_final.csv"), reward_csv(&run.final_rewards))?;
        let row = self.comparison(run);
        write(&dir.join("comparison.csv"), comparison_csv(std::slice::from_ref(&row)))?;
        write(&dir.join("summary.txt"), self.summary(run, &row))?;
        Ok(())
    }

    fn summary(&self, run: &RlRun, row: &ComparisonRow) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "algo: {}", run.algo);
        let _ = writeln!(s, "seed: {}", self.config.seed);
        let _ = writeln!(s, "scenario_fingerprint: {:016x}", scenario_fingerprint(&self.scenarios));
        let _ = writeln!(s, "scenarios: {}", self.scenarios.len());
        let _ = writeln!(s, "rl_steps: {}", self.config.rl.steps);
        let _ = writeln!(s, "initial_mean: {}", row.initial);
        let _ = writeln!(s, "final_mean: {}", row.fin);
        let _ = writeln!(s, "relative_gain: {}", row.gain);
        let rollout = self.rollout_comparison(run);
        let _ = writeln!(s, "rollout_initial_mean: {}", rollout.initial);
        let _ = writeln!(s, "rollout_final_mean: {}", rollout.fin);
        let _ = writeln!(s, "rollout_relative_gain: {}", rollout.gain);
        let _ = writeln!(s, "tokenizer: {}", self.tokenizer.summary());
        let _ = writeln!(s, "polarization: {}", self.polarization().summary());
        let _ = writeln!(s);
        s.push_str(&comparison_table(std::slice::from_ref(row)));
        s
    }
}

fn reward_csv(rows: &[String]) -> String {
    let mut out = format!("{}\n", RewardBreakdown::CSV_HEADER);
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

fn stats_for(
    cfg: &ExperimentConfig,
    p: &PolicyParams,
    scenarios: &[Scenario],
    env: &RewardEnv,
    step: usize,
) -> (Vec<GroupStat>, Vec<String>) {
    collect_stats(p, scenarios, cfg.rl.group_size, cfg.rl.temperature, derive_seed(cfg.seed, &[TAG_STATS]), step, env)
}

/// Mean dataset reward of one near-greedy rollout per scenario.
fn eval_mean(cfg: &ExperimentConfig, p: &PolicyParams, scenarios: &[Scenario], env: &RewardEnv) -> f64 {
    let (stats, _) = collect_stats(p, scenarios, 1, cfg.rl.eval_temperature, derive_seed(cfg.seed, &[TAG_STATS, 1]), 0, env);
    mean_group_mean(&stats)
}

/// FNV-1a over scenario ids and seeds; equal sets give equal fingerprints.
pub fn scenario_fingerprint(scenarios: &[Scenario]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for sc in scenarios {
        for b in sc.id.bytes().chain(sc.seed.to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Runs the full pipeline for `cfg.rl.algo` and writes the run directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Prepared, RlRun), ExperimentError> {
    let prep = Prepared::new(cfg)?;
    let run = prep.run_rl(cfg.rl.algo)?;
    prep.write_run(&run)?;
    Ok((prep, run))
}

/// Parsed `summary.txt` of a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub algo: Algo,
    pub seed: u64,
    pub fingerprint: String,
    pub initial: f64,
    pub fin: f64,
    pub gain: f64,
}

pub fn read_summary(dir: &Path) -> Result<RunSummary, ExperimentError> {
    let path = dir.join("summary.txt");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let field = |key: &str| -> Result<String, ExperimentError> {
        text.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
            .map(str::to_string)
            .ok_or_else(|| ExperimentError::Config(format!("{}: missing {key}", path.display())))
    };
    let num = |key: &str| -> Result<f64, ExperimentError> {
        field(key)?.parse().map_err(|_| ExperimentError::Config(format!("{}: bad {key}", path.display())))
    };
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        algo: field("algo")?.parse().map_err(ExperimentError::Config)?,
        seed: field("seed")?.parse().map_err(|_| ExperimentError::Config("bad seed".into()))?,
        fingerprint: field("scenario_fingerprint")?,
        initial: num("initial_mean")?,
        fin: num("final_mean")?,
        gain: num("relative_gain")?,
    })
}

/// Joins run summaries into one table; refuses runs whose seeds or
/// scenario sets differ.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<(Vec<RunSummary>, String), ExperimentError> {
    if dirs.len() < 2 {
        return Err(ExperimentError::Config("compare needs at least two run directories".into()));
    }
    let runs = dirs.iter().map(|d| read_summary(d)).collect::<Result<Vec<_>, _>>()?;
    let first = &runs[0];
    for r in &runs[1..] {
        if r.seed != first.seed {
            return Err(ExperimentError::Mismatch(format!("seed {} in {} vs {} in {}", first.seed, first.dir.display(), r.seed, r.dir.display())));
        }
        if r.fingerprint != first.fingerprint {
            return Err(ExperimentError::Mismatch(format!(
                "scenario sets differ between {} and {}",
                first.dir.display(),
                r.dir.display()
            )));
        }
    }
    let mut table = format!("{:<8} {:>12} {:>12} {:>10} {:>12}  {}\n", "algo", "initial", "final", "gain", "vs first", "run");
    for r in &runs {
        let _ = writeln!(
            table,
            "{:<8} {:>12.6} {:>12.6} {:>9.2}% {:>12.6}  {}",
            r.algo.to_string(),
            r.initial,
            r.fin,
            100.0 * r.gain,
            r.fin - first.fin,
            r.dir.display()
        );
    }
    Ok((runs, table))
}

/// Recomputes group statistics for a saved policy on a saved scenario set.
pub fn stats_for_saved(
    cfg: &ExperimentConfig,
    policy_path: &Path,
    scenarios_path: &Path,
    codebook_path: &Path,
) -> Result<(Vec<GroupStat>, PolarizationReport), ExperimentError> {
    let policy = PolicyParams::load(policy_path)?;
    let scenarios = load_scenarios(scenarios_path)?;
    let mut env = RewardEnv::new(Codebook::load(codebook_path)?);
    env.sim = cfg.sim;
    let (stats, _) = stats_for(cfg, &policy, &scenarios, &env, 0);
    let report = polarization_check(&bin_profile(&stats, cfg.bins), &PolarizationRegions::default());
    Ok((stats, report))
}

/// Trajectory of a token sequence decoded from a scenario's ego pose.
pub fn decode_for(sc: &Scenario, ids: &TokenSequence, cb: &Codebook) -> Result<Trajectory, ExperimentError> {
    Ok(crate::tokenizer::decode(ids, cb, sc.ego.pose)?)
}

/// Mean group mean of each stratum, in [`Difficulty::ALL`] order.
pub fn stratum_means(scenarios: &[Scenario], stats: &[GroupStat]) -> Vec<(Difficulty, f64, f64)> {
    Difficulty::ALL
        .iter()
        .map(|&d| {
            let sel: Vec<&GroupStat> = scenarios
                .iter()
                .zip(stats)
                .filter(|(sc, _)| sc.difficulty == d)
                .map(|(_, s)| s)
                .collect();
            let n = sel.len().max(1) as f64;
            (d, sel.iter().map(|s| s.group_mean).sum::<f64>() / n, sel.iter().map(|s| s.group_std).sum::<f64>() / n)
        })
        .collect()
}
