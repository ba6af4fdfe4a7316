use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvSpec};
use crate::error::{Error, Result};
use crate::genome::Genome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub total_return: f64,
    pub reached_goal: bool,
    pub steps: usize,
}

/// Rebuilds a saved genome and rolls it out once.
pub fn replay(genome_path: impl AsRef<Path>, spec: &EnvSpec) -> Result<ReplayOutcome> {
    replay_genome(&Genome::load(genome_path)?, spec)
}

pub fn replay_genome(genome: &Genome, spec: &EnvSpec) -> Result<ReplayOutcome> {
    spec.validate()?;
    let shape = genome.shape();
    if shape.input_dim != spec.observation_dim() || shape.output_dim != spec.action_dim() {
        return Err(Error::Config(format!(
            "genome network is {}->{} but the task needs {}->{}",
            shape.input_dim,
            shape.output_dim,
            spec.observation_dim(),
            spec.action_dim()
        )));
    }
    let traj = Env::new(spec.clone()).rollout(&genome.materialize()?)?;
    Ok(ReplayOutcome {
        total_return: traj.total_return,
        reached_goal: traj.reached_goal,
        steps: traj.len(),
    })
}
