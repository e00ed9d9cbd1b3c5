use std::path::Path;
use std::process::{Command, Output};

fn drivelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivelab")).args(args).output().expect("spawn drivelab")
}

const TINY: &[&str] = &[
    "--corpus-size",
    "200",
    "--vocab",
    "32",
    "--scenarios-per-stratum",
    "4",
    "--demos-per-stratum",
    "6",
    "--batch-size",
    "4",
];

fn run_tiny(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    drivelab(&args)
}

fn summary_field(dir: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn help_succeeds_and_usage_errors_exit_one() {
    assert_eq!(drivelab(&["--help"]).status.code(), Some(0));
    assert_eq!(drivelab(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(drivelab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(drivelab(&["run", "--algo", "ppo"]).status.code(), Some(1));
    assert_eq!(drivelab(&["compare", "only-one"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let out = drivelab(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(drivelab(&["run", "--group-size", "1", "--print-config"]).status.code(), Some(2));
}

#[test]
fn print_config_round_trips_through_config_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = drivelab(&["run", "--seed", "9", "--algo", "grpo", "--print-config"]);
    assert!(out.status.success());
    let path = tmp.path().join("cfg.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let again = drivelab(&["run", "--config", path.to_str().unwrap(), "--print-config"]);
    assert!(again.status.success());
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn fit_tokenizer_writes_a_loadable_codebook() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("cb.txt");
    let out = drivelab(&["fit-tokenizer", "--corpus-size", "100", "--vocab", "16", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cb = drivelab::tokenizer::Codebook::load(&path).unwrap();
    assert_eq!(cb.len(), 16);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean_endpoint_error"));
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = run_tiny(&a, &["--workers", "1", "--steps", "3"]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = run_tiny(&b, &["--workers", "2", "--steps", "3"]);
    assert!(ob.status.success(), "{}", String::from_utf8_lossy(&ob.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for want in ["config.json", "history.csv", "bins.csv", "tertiles.csv", "comparison.csv", "summary.txt"] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    for name in names.iter().filter(|n| *n != "config.json") {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name} differs");
    }

    let stored = a.join("config.json");
    let c = tmp.path().join("c");
    let oc = drivelab(&["run", "--config", stored.to_str().unwrap(), "--out-dir", c.to_str().unwrap()]);
    assert!(oc.status.success());
    assert_eq!(std::fs::read(a.join("history.csv")).unwrap(), std::fs::read(c.join("history.csv")).unwrap());
}

#[test]
fn zero_steps_leave_the_policy_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let out = run_tiny(&dir, &["--steps", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary_field(&dir, "initial_mean"), summary_field(&dir, "final_mean"));
    assert_eq!(summary_field(&dir, "relative_gain"), "0");
    assert_eq!(
        std::fs::read(dir.join("policy_sft.txt")).unwrap(),
        std::fs::read(dir.join("policy_final.txt")).unwrap()
    );
}

#[test]
fn compare_joins_matched_runs_and_refuses_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let (dr, gr, other) = (tmp.path().join("dr"), tmp.path().join("gr"), tmp.path().join("other"));
    assert!(run_tiny(&dr, &["--steps", "2", "--algo", "drgrpo"]).status.success());
    assert!(run_tiny(&gr, &["--steps", "2", "--algo", "grpo"]).status.success());
    assert!(run_tiny(&other, &["--steps", "2", "--seed", "5"]).status.success());

    let same = drivelab(&["compare", dr.to_str().unwrap(), dr.to_str().unwrap()]);
    assert!(same.status.success());
    let table = String::from_utf8_lossy(&same.stdout);
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().skip(1).all(|l| l.contains(" 0.000000 ")));

    let pair = drivelab(&["compare", dr.to_str().unwrap(), gr.to_str().unwrap()]);
    assert!(pair.status.success());
    let table = String::from_utf8_lossy(&pair.stdout);
    assert!(table.contains("drgrpo") && table.contains("grpo "));

    let bad = drivelab(&["compare", dr.to_str().unwrap(), other.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("disagree"));
}

#[test]
fn stats_recomputes_group_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    assert!(run_tiny(&dir, &["--steps", "0"]).status.success());
    let out = drivelab(&["stats", dir.to_str().unwrap(), "--policy", dir.join("policy_sft.txt").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8_lossy(&out.stdout);
    assert_eq!(csv.lines().count(), 1 + 12);
    assert!(String::from_utf8_lossy(&out.stderr).contains("polarization"));
    assert_eq!(csv, std::fs::read_to_string(dir.join("stats_initial.csv")).unwrap());
}
