use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mctspo::harness::{self, AlgorithmConfig, AlgorithmKind, ExperimentConfig};
use mctspo::{EnvKind, EnvSpec};

/// Monte-Carlo tree search over policy parameters, with a Deep GA baseline.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// 32/32 network, 5e5 environment calls, 10 seeds.
    Desk,
    /// 128/64/32 network, 5e6 environment calls, 20 seeds.
    Paper,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run trials and write curves, best genomes, and a summary.
    Train {
        /// Experiment config (JSON). Flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset used when no config file is given.
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long)]
        algo: Option<AlgorithmKind>,
        #[arg(long)]
        env: Option<EnvKind>,
        /// Trial seed; repeat for several trials.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Environment calls per trial.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record measured wall-clock times in the curves.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Roll out a saved genome once and print the result as JSON.
    Replay {
        #[arg(long)]
        genome: PathBuf,
        /// Task with default settings.
        #[arg(long, conflicts_with = "config")]
        env: Option<EnvKind>,
        /// Take the task settings from an experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run two experiment configs and print a comparison table.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        /// Directory for the comparison CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a preset config as JSON.
    Config {
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long, default_value = "mctspo")]
        algo: AlgorithmKind,
        #[arg(long, default_value = "sparse-mountain-car")]
        env: EnvKind,
    },
}

fn preset(p: Preset, env: EnvKind, algo: AlgorithmKind) -> ExperimentConfig {
    match p {
        Preset::Desk => ExperimentConfig::desk(env, algo),
        Preset::Paper => ExperimentConfig::paper(env, algo),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MCTSPO_LOG", "warn")).init();
    match Cli::parse().command {
        Command::Train {
            config,
            preset: p,
            algo,
            env,
            seeds,
            budget,
            out,
            wall_clock,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => preset(
                    p,
                    env.unwrap_or(EnvKind::SparseMountainCar),
                    algo.unwrap_or(AlgorithmKind::Mctspo),
                ),
            };
            if config.is_some() {
                if let Some(kind) = env.filter(|k| *k != cfg.env.kind()) {
                    cfg.env = EnvSpec::for_kind(kind);
                }
                if let Some(kind) = algo.filter(|k| *k != cfg.algorithm.kind()) {
                    cfg.algorithm = AlgorithmConfig::default_for(kind);
                }
            }
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.record_wall_clock |= wall_clock;
            let summary = harness::run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if summary.trials.is_empty() {
                bail!("every trial failed");
            }
        }
        Command::Replay { genome, env, config } => {
            let spec = match (env, config) {
                (_, Some(path)) => ExperimentConfig::load(&path)?.env,
                (Some(kind), None) => EnvSpec::for_kind(kind),
                (None, None) => bail!("replay needs --env or --config"),
            };
            let outcome = harness::replay(&genome, &spec).with_context(|| format!("replaying {}", genome.display()))?;
            println!("{}", serde_json::to_string(&outcome)?);
        }
        Command::Compare {
            config_a,
            config_b,
            out,
        } => {
            let a = ExperimentConfig::load(&config_a)?;
            let b = ExperimentConfig::load(&config_b)?;
            let table = harness::compare(&a, &b)?;
            print!("{}", table.to_text());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("comparison.csv");
                std::fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Config { preset: p, algo, env } => {
            println!("{}", preset(p, env, algo).to_json());
        }
    }
    Ok(())
}
