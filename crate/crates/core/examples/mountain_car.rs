//! One desk-scale search on Sparse Mountain Car, printing the learning curve
//! and replaying the best policy.
//!
//! cargo run --release -p mctspo --example mountain_car -- [seed] [budget]

use mctspo::harness::{self, AlgorithmKind, ExperimentConfig};
use mctspo::EnvKind;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let mut cfg = ExperimentConfig::desk(EnvKind::SparseMountainCar, AlgorithmKind::Mctspo);
    if let Some(b) = args.next() {
        cfg.budget = b.parse()?;
    }

    let result = harness::run_trial(&cfg, seed)?;
    println!("env_calls,best_return");
    for p in &result.curve {
        println!("{},{}", p.env_calls, p.best_return);
    }
    let replay = harness::replay_genome(&result.best_genome, &cfg.env)?;
    eprintln!(
        "best {:.4} (goal: {}) after {} simulations; genome depth {}; replay {:.4}",
        result.best_return,
        result.best_reached_goal,
        result.iterations,
        result.best_genome.depth(),
        replay.total_return
    );
    Ok(())
}
