//! Acceptance suite: nine end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs with a custom harness so the report is always printed; the process
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use drivelab::analysis::TertileReport;
use drivelab::experiment::{fit_tokenizer_k, run_experiment, ExperimentConfig, Prepared};
use drivelab::optim::{
    drgrpo_advantage, grpo_advantage, population_std, surrogate_loss_and_grad, Algo, ClipConfig, Rollout, RolloutGroup,
};
use drivelab::policy::{grad_log_prob, log_prob, PolicyParams, ScenarioFeatures};
use drivelab::rewards::{format_reward, length_reward, normalized_rfs, pdm_score, total_reward, PdmComponents, RewardBreakdown};
use drivelab::tokenizer::{encode, parse, serialize, TokenSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.2}s of {:.0}s budget", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn advantage_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut ok = true;
    for i in 0..10_000 {
        let r: Vec<f64> = if i % 50 == 0 {
            vec![rng.gen_range(0.0..1.0); 8]
        } else {
            (0..8).map(|_| rng.gen_range(0.0..1.0)).collect()
        };
        let dr = drgrpo_advantage(&r);
        let gr = grpo_advantage(&r);
        worst_sum = worst_sum.max(dr.iter().sum::<f64>().abs());
        let sd = population_std(&r);
        if sd >= 1e-8 {
            for (g, d) in gr.iter().zip(&dr) {
                worst_ratio = worst_ratio.max((g - d / sd).abs());
            }
        } else {
            ok &= dr.iter().chain(&gr).all(|&a| a == 0.0);
        }
    }
    let (fast, t) = within(start.elapsed(), Duration::from_secs(1));
    outcome(
        ok && worst_sum <= 1e-9 && worst_ratio <= 1e-9 && fast,
        format!("max |sum dr| {worst_sum:.1e}, max |grpo - dr/std| {worst_ratio:.1e}, {t}"),
    )
}

fn low_variance_amplification() -> Outcome {
    let pattern = [1.0, -0.5, 0.25, -1.5, 0.75, 0.0, 1.25, -1.25];
    let base = 0.5;
    let (sa, sb) = (0.01, 0.5);
    let ga: Vec<f64> = pattern.iter().map(|p| base + sa * p).collect();
    let gb: Vec<f64> = pattern.iter().map(|p| base + sb * p).collect();
    let (grpo_a, grpo_b) = (grpo_advantage(&ga), grpo_advantage(&gb));
    let (dr_a, dr_b) = (drgrpo_advantage(&ga), drgrpo_advantage(&gb));
    let grpo_diff = grpo_a.iter().zip(&grpo_b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dr_diff = dr_a.iter().zip(&dr_b).map(|(a, b)| (a * sb / sa - b).abs()).fold(0.0, f64::max);
    outcome(
        grpo_diff <= 1e-9 && dr_diff <= 1e-9,
        format!("grpo pair max diff {grpo_diff:.1e}, dr.grpo scaled-pair max diff {dr_diff:.1e}"),
    )
}

fn reward_formulas() -> Outcome {
    let start = Instant::now();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut worst = 0.0f64;
    for &nc in &grid {
        for &dac in &grid {
            for &ttc in &grid {
                for &comfort in &grid {
                    for &ep in &grid {
                        let oracle = nc * dac * (5.0 * ttc + 2.0 * comfort + 5.0 * ep) / 12.0;
                        let got = pdm_score(&PdmComponents { nc, dac, ttc, comfort, ep });
                        worst = worst.max((got - oracle).abs());
                    }
                }
            }
        }
    }
    let rfs_ok = [(3.0, 0.0), (4.0, 0.0), (7.0, 0.5), (10.0, 1.0)]
        .iter()
        .all(|&(s, want)| (normalized_rfs(s) - want).abs() <= 1e-12);
    let total_ok = total_reward(0.25, 0.25, 1.0).map(|t| (t - 1.0).abs() <= 1e-12).unwrap_or(false);
    let (fast, t) = within(start.elapsed(), Duration::from_secs(1));
    outcome(
        worst <= 1e-12 && rfs_ok && total_ok && fast,
        format!("pdm grid 3125 points max err {worst:.1e}, rfs map {rfs_ok}, total {total_ok}, {t}"),
    )
}

fn format_and_length() -> Outcome {
    let seq10 = (0..10).map(|i| format!("TRAJ_{:04}", i * 200)).collect::<Vec<_>>().join(" ");
    let seq8 = vec!["TRAJ_0007"; 8].join(" ");
    let cases: Vec<(&str, bool)> = vec![
        ("TRAJ_0000", true),
        ("TRAJ_2047", true),
        ("TRAJ_2046", true),
        ("TRAJ_0001", true),
        ("TRAJ_0010", true),
        ("TRAJ_0100", true),
        ("TRAJ_1000", true),
        ("TRAJ_1999", true),
        ("TRAJ_2000", true),
        ("TRAJ_0999", true),
        ("TRAJ_0001 TRAJ_0002", true),
        ("TRAJ_0242 TRAJ_0150 TRAJ_0172", true),
        ("TRAJ_0000 TRAJ_2047", true),
        ("TRAJ_2047 TRAJ_2047 TRAJ_2047", true),
        (&seq8, true),
        (&seq10, true),
        ("TRAJ_0512 TRAJ_0128 TRAJ_0064", true),
        ("TRAJ_1234", true),
        ("TRAJ_2048", false),
        ("TRAJ_9999", false),
        ("TRAJ_3000", false),
        ("TRAJ_001", false),
        ("TRAJ_1", false),
        ("TRAJ_00001", false),
        ("TRAJ_12345", false),
        ("traj_0001", false),
        ("Traj_0001", false),
        ("TRAJ-0001", false),
        ("TRAJ0001", false),
        ("0001", false),
        ("", false),
        (" ", false),
        ("TRAJ_", false),
        ("TRAJ_0001 ", false),
        (" TRAJ_0001", false),
        ("TRAJ_0001  TRAJ_0002", false),
        ("TRAJ_0001\tTRAJ_0002", false),
        ("TRAJ_0001\nTRAJ_0002", false),
        ("TRAJ_0001,TRAJ_0002", false),
        ("TRAJ_0001TRAJ_0002", false),
        ("TRAJ_+001", false),
        ("TRAJ_-001", false),
        ("TRAJ_00a1", false),
        ("TRAJ_0x01", false),
        ("TRAJ_1.00", false),
        ("TRAJ_ 001", false),
        ("TRAJ_\u{0661}\u{0662}\u{0663}\u{0664}", false),
        ("TRAJ_0001 TRAJ_2048", false),
        ("TRAJ_0001 traj_0002", false),
        ("TRAJ_0001 TRAJ_002", false),
    ];
    let mut failures = Vec::new();
    for (text, valid) in &cases {
        let want = if *valid { 0.25 } else { 0.0 };
        if format_reward(text) != want {
            failures.push(format!("{text:?}"));
        }
    }
    let mut length_ok = true;
    for expected in [8, 10] {
        for n in 0..=12 {
            let ids = TokenSequence::new(vec![5; n]);
            let want = if n == expected { 0.25 } else { 0.0 };
            length_ok &= length_reward(&ids, expected) == want;
        }
    }
    outcome(
        cases.len() == 50 && failures.is_empty() && length_ok,
        format!("{} format cases, mismatches {:?}, length gate {length_ok}", cases.len(), failures),
    )
}

fn rel_err(a: &PolicyParams, b: &PolicyParams) -> f64 {
    let mut num = 0.0;
    for i in 0..a.n_params() {
        num += (a.get(i) - b.get(i)).powi(2);
    }
    num.sqrt() / a.norm().max(b.norm()).max(1e-12)
}

fn central_difference(p: &PolicyParams, h: f64, f: impl Fn(&PolicyParams) -> f64) -> PolicyParams {
    let mut out = p.zeros_like();
    let mut q = p.clone();
    for i in 0..p.n_params() {
        let x = p.get(i);
        q.set(i, x + h);
        let up = f(&q);
        q.set(i, x - h);
        let down = f(&q);
        q.set(i, x);
        out.set(i, (up - down) / (2.0 * h));
    }
    out
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let clip = ClipConfig::default();
    let (lo, hi) = clip.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_sur, mut worst_lp) = (0.0f64, 0.0f64);
    let mut done = 0;
    let mut skipped = 0;
    while done < 100 {
        let old = PolicyParams::init(8, 4, 3, 0.8, rng.gen());
        let mut new = old.clone();
        for i in 0..new.n_params() {
            new.set(i, new.get(i) + rng.gen_range(-0.15..0.15));
        }
        let features = ScenarioFeatures((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let rollouts: Vec<Rollout> = (0..4)
            .map(|_| {
                let ids = TokenSequence::new((0..3).map(|_| rng.gen_range(0..8)).collect());
                let (old_lp, _) = log_prob(&old, &features, &ids);
                let reward = RewardBreakdown::new(0.25, 0.25, rng.gen_range(0.0..1.0)).unwrap();
                Rollout { text: serialize(&ids), ids, old_log_probs: old_lp, reward }
            })
            .collect();
        let group = RolloutGroup::from_rollouts("fd".into(), features.clone(), rollouts);
        let near_boundary = group.rollouts.iter().any(|ro| {
            let (new_lp, _) = log_prob(&new, &features, &ro.ids);
            new_lp.iter().zip(&ro.old_log_probs).any(|(n, o)| {
                let r = (n - o).exp();
                (r - lo).abs() <= 1e-3 || (r - hi).abs() <= 1e-3
            })
        });
        if near_boundary {
            skipped += 1;
            continue;
        }
        let adv = grpo_advantage(&group.total_rewards());
        let analytic = surrogate_loss_and_grad(&new, &group, &adv, &clip).unwrap().grad;
        let numeric = central_difference(&new, 1e-5, |q| surrogate_loss_and_grad(q, &group, &adv, &clip).unwrap().loss);
        worst_sur = worst_sur.max(rel_err(&analytic, &numeric));

        let ids = &group.rollouts[0].ids;
        let analytic = grad_log_prob(&new, &features, ids);
        let numeric = central_difference(&new, 1e-5, |q| log_prob(q, &features, ids).1);
        worst_lp = worst_lp.max(rel_err(&analytic, &numeric));
        done += 1;
    }
    let (fast, t) = within(start.elapsed(), Duration::from_secs(30));
    outcome(
        worst_sur < 1e-4 && worst_lp < 1e-4 && fast,
        format!("100 instances ({skipped} near-boundary skipped), surrogate rel err {worst_sur:.1e}, log-prob rel err {worst_lp:.1e}, {t}"),
    )
}

fn tokenizer_fidelity() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let small = fit_tokenizer_k(&cfg, 32).expect("fit K=32");
    let large = fit_tokenizer_k(&cfg, 128).expect("fit K=128");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut round_trip = true;
    for _ in 0..2000 {
        let n = rng.gen_range(1..12);
        let ids = TokenSequence::new((0..n).map(|_| rng.gen_range(0..=2047)).collect());
        round_trip &= parse(&serialize(&ids)).map(|back| back == ids).unwrap_or(false);
    }
    let corpus = drivelab::corpus::generate_corpus(50, 4.0, 99);
    for t in &corpus {
        let ids = encode(t, &large.codebook).expect("encode");
        round_trip &= parse(&serialize(&ids)).map(|back| back == ids).unwrap_or(false);
    }
    let (fast, t) = within(start.elapsed(), Duration::from_secs(120));
    outcome(
        large.mean_endpoint_error < small.mean_endpoint_error && round_trip && fast,
        format!(
            "endpoint error K=128 {:.4} m vs K=32 {:.4} m over {} trajectories, text round trip {round_trip}, {t}",
            large.mean_endpoint_error, small.mean_endpoint_error, cfg.tokenizer.corpus_size
        ),
    )
}

fn polarization(prep: &Prepared, elapsed: Duration) -> Outcome {
    let report = prep.polarization();
    let (fast, t) = within(elapsed, Duration::from_secs(180));
    outcome(
        report.passed == Some(true) && prep.scenarios.len() == 240 && fast,
        format!("{} scenarios, {}, {t}", prep.scenarios.len(), report.summary()),
    )
}

fn mid_delta(report: &TertileReport) -> f64 {
    report.tertiles.iter().find(|t| t.label == "mid").map(|t| t.delta).unwrap_or(f64::NAN)
}

fn headline(seed0: &Prepared, seed0_elapsed: Duration) -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut wins = 0;
    for seed in 0..3u64 {
        let owned;
        let prep = if seed == 0 {
            seed0
        } else {
            let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
            owned = Prepared::new(&cfg).expect("prepare");
            &owned
        };
        let dr = prep.run_rl(Algo::Drgrpo).expect("dr.grpo run");
        let gr = prep.run_rl(Algo::Grpo).expect("grpo run");
        let (dr_row, gr_row) = (prep.comparison(&dr), prep.comparison(&gr));
        let (dr_mid, gr_mid) = (mid_delta(&prep.tertiles(&dr).unwrap()), mid_delta(&prep.tertiles(&gr).unwrap()));
        let ok = dr_row.gain >= 3.0 * gr_row.gain && dr_mid > gr_mid;
        wins += ok as usize;
        lines.push(format!(
            "seed {seed}: dr.grpo {:+.2}% grpo {:+.2}% mid-tertile {dr_mid:+.3}/{gr_mid:+.3} {}",
            100.0 * dr_row.gain,
            100.0 * gr_row.gain,
            if ok { "ok" } else { "miss" }
        ));
    }
    let (fast, t) = within(start.elapsed() + seed0_elapsed, Duration::from_secs(600));
    outcome(wins >= 2 && fast, format!("{wins}/3 seeds [{}], {t}", lines.join("; ")))
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != "config.json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 11;
    cfg.tokenizer.corpus_size = 200;
    cfg.scenarios_per_stratum = 8;
    cfg.sft.demos_per_stratum = 10;
    cfg.rl.steps = 6;
    cfg.rl.batch_size = 8;
    let mut outputs = Vec::new();
    for (i, workers) in [1usize, 3].into_iter().enumerate() {
        let mut c = cfg.clone();
        c.output_dir = tmp.path().join(format!("run{i}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        pool.install(|| run_experiment(&c)).expect("run");
        outputs.push(read_csvs(&c.output_dir));
    }
    let csvs = outputs[0].iter().filter(|(name, _)| name.ends_with(".csv")).count();
    let differing: Vec<&str> = outputs[0]
        .iter()
        .zip(&outputs[1])
        .filter(|((na, a), (nb, b))| na != nb || a != b)
        .map(|((n, _), _)| n.as_str())
        .collect();
    outcome(
        differing.is_empty() && outputs[0].len() == outputs[1].len() && csvs >= 8,
        format!("{} files ({csvs} csv) compared across 1 and 3 workers, differing {:?}", outputs[0].len(), differing),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("criterion {}: {} [{}] {}", results.len() + 1, if o.passed { "PASS" } else { "FAIL" }, name, o.detail);
        results.push((name, o));
    };
    report("advantage identities", advantage_identities());
    report("low-variance amplification", low_variance_amplification());
    report("reward formulas", reward_formulas());
    report("format and length rewards", format_and_length());
    report("gradient correctness", gradient_correctness());
    report("tokenizer fidelity", tokenizer_fidelity());
    let start = Instant::now();
    let prep = Prepared::new(&ExperimentConfig::default()).expect("prepare seed 0");
    let prep_elapsed = start.elapsed();
    report("polarization premise", polarization(&prep, prep_elapsed));
    report("headline direction", headline(&prep, prep_elapsed));
    report("determinism", determinism());
    drop(report);
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.passed).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: {} of {} criteria failed: {}", failed.len(), results.len(), failed.join(", "));
        std::process::exit(1);
    }
}
