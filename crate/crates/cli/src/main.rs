//! Command-line driver for the tokenizer, the RL experiment and its reports.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drivelab::analysis::{bin_profile, stats_csv};
use drivelab::experiment::{compare_runs, fit_tokenizer, run_experiment, stats_for_saved, ExperimentConfig};
use drivelab::optim::Algo;

#[derive(Debug, Parser)]
#[command(name = "drivelab", version, about = "Group-relative RL on a tokenized driving micro-world")]
struct Cli {
    /// Worker threads for rollouts and scenario generation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a trajectory codebook on the synthetic corpus and save it.
    FitTokenizer {
        #[command(flatten)]
        overrides: Overrides,
        /// Codebook output path.
        #[arg(long, default_value = "codebook.txt")]
        out: PathBuf,
    },
    /// Run the full pipeline for one algorithm and write a run directory.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Print the effective config as JSON and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Join the summaries of finished runs into one table.
    Compare {
        #[arg(required = true, num_args = 2..)]
        run_dirs: Vec<PathBuf>,
    },
    /// Recompute group statistics of a saved policy on a run's scenarios.
    Stats {
        /// Run directory holding config.json, scenarios.json and codebook.txt.
        run_dir: PathBuf,
        /// Policy checkpoint (default: the run's policy_final.txt).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Write per-scenario stats CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    corpus_size: Option<usize>,
    #[arg(long)]
    scenarios_per_stratum: Option<usize>,
    #[arg(long)]
    demos_per_stratum: Option<usize>,
    #[arg(long)]
    sft_steps: Option<usize>,
    #[arg(long)]
    sft_lr: Option<f64>,
    #[arg(long)]
    algo: Option<Algo>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    eval_temperature: Option<f64>,
    #[arg(long)]
    eps_low: Option<f64>,
    #[arg(long)]
    eps_high: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set!(
            seed => seed,
            vocab => tokenizer.vocab,
            corpus_size => tokenizer.corpus_size,
            scenarios_per_stratum => scenarios_per_stratum,
            demos_per_stratum => sft.demos_per_stratum,
            sft_steps => sft.steps,
            sft_lr => sft.lr,
            algo => rl.algo,
            steps => rl.steps,
            lr => rl.lr,
            group_size => rl.group_size,
            batch_size => rl.batch_size,
            temperature => rl.temperature,
            eval_temperature => rl.eval_temperature,
            eps_low => rl.eps_low,
            eps_high => rl.eps_high,
            bins => bins,
            out_dir => output_dir,
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building worker pool")?;
    }
    match cli.command {
        Command::FitTokenizer { overrides, out } => {
            let cfg = overrides.resolve()?;
            let fit = fit_tokenizer(&cfg)?;
            fit.codebook.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", fit.summary());
            println!("codebook written to {}", out.display());
        }
        Command::Run { overrides, print_config } => {
            let cfg = overrides.resolve()?;
            if print_config {
                print!("{}", cfg.to_json());
                return Ok(());
            }
            log::info!("running {} into {}", cfg.rl.algo, cfg.output_dir.display());
            let (prep, run) = run_experiment(&cfg)?;
            let row = prep.comparison(&run);
            println!("polarization: {}", prep.polarization().summary());
            println!(
                "{}: initial {:.6} final {:.6} gain {:+.2}%",
                run.algo,
                row.initial,
                row.fin,
                100.0 * row.gain
            );
            println!("run written to {}", cfg.output_dir.display());
        }
        Command::Compare { run_dirs } => {
            let (_, table) = compare_runs(&run_dirs)?;
            print!("{table}");
        }
        Command::Stats { run_dir, policy, out } => {
            let cfg = ExperimentConfig::load(&run_dir.join("config.json"))?;
            let policy = policy.unwrap_or_else(|| run_dir.join("policy_final.txt"));
            let (stats, report) =
                stats_for_saved(&cfg, &policy, &run_dir.join("scenarios.json"), &run_dir.join("codebook.txt"))?;
            let csv = stats_csv(&stats);
            match out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            eprint!("{}", bin_profile(&stats, cfg.bins).to_csv());
            eprintln!("polarization: {}", report.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
