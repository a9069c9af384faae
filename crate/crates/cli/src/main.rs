use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uambrl::harness::{self, ExperimentConfig};
use uambrl::sac::SacAgent;

#[derive(Parser)]
#[command(name = "uambrl", version, about = "Uncertainty-aware model-based RL experiments on a lane-driving simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed and write metrics, checkpoints and a reward summary.
    Train(Common),
    /// Evaluate a saved agent, clean and with action noise.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Agent directory; defaults to `<out>/seed_<seed>/agent`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare fixed-length rollouts against adaptive truncation and vanilla SAC.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rollout lengths; overrides `ablate.k_list`.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Tabulate the model-error bound over a grid of error levels and horizons.
    Bound(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this single seed; overrides `seeds` and `train.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted key assignment such as `train.sac.lr=3e-4`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("override `{kv}` is not of the form KEY=VALUE");
            };
            cfg.apply_override(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
            cfg.train.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let rows = harness::run_train(&cfg, &cfg.output_dir)?;
            let last = rows.last().map(|r| r.ema).unwrap_or(f64::NAN);
            println!(
                "trained {} seed(s), {} epochs, final smoothed reward {last:.3}; outputs in {}",
                cfg.seed_list().len(),
                rows.len(),
                cfg.output_dir.display()
            );
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.resolve()?;
            let seed = cfg.seed_list()[0];
            let dir = checkpoint.unwrap_or_else(|| cfg.output_dir.join(format!("seed_{seed}")).join("agent"));
            if !dir.join("manifest.toml").is_file() {
                bail!("no agent checkpoint at {}", dir.display());
            }
            let agent = SacAgent::load(&dir, &cfg.train.sac).with_context(|| format!("loading {}", dir.display()))?;
            let report = harness::run_eval(&agent, &cfg.train.env, &cfg.eval)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            report.write_csv(&cfg.output_dir.join("eval.csv"))?;
            print!("{}", report.table());
        }
        Command::Ablate { common, k } => {
            let mut cfg = common.resolve()?;
            if !k.is_empty() {
                cfg.ablate.k_list = k;
            }
            cfg.validate()?;
            let table = harness::run_ablation(&cfg, &cfg.output_dir)?;
            println!(
                "ablation over {} algorithm(s) written to {}",
                table.algorithms.len(),
                cfg.output_dir.join("ablation.csv").display()
            );
        }
        Command::Bound(common) => {
            let cfg = common.resolve()?;
            let rows = harness::run_bound(&cfg.bound, &cfg.output_dir)?;
            println!("eps_m,eps_pi,k_best,c_min");
            for m in harness::bound_minima(&rows) {
                println!("{},{},{},{:.4}", m.eps_m, m.eps_pi, m.k_best, m.c_min);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
