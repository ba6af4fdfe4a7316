//! Experiment configuration, multi-seed trials, output files, replay, and
//! side-by-side comparison.

mod compare;
mod replay;
mod trial;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deepga::GaConfig;
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::policy_net::{Activation, NetworkShape};
use crate::search::SearchConfig;

pub use compare::{compare, ComparisonRow, ComparisonTable};
pub use replay::{replay, replay_genome, ReplayOutcome};
pub use trial::{
    read_curve_csv, run_experiment, run_trial, write_curve_csv, ExperimentSummary, FailedTrial, TrialResult,
    CURVE_HEADER,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Mctspo,
    Deepga,
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mctspo" => Ok(AlgorithmKind::Mctspo),
            "deepga" => Ok(AlgorithmKind::Deepga),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlgorithmKind::Mctspo => "mctspo",
            AlgorithmKind::Deepga => "deepga",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Mctspo(SearchConfig),
    Deepga(GaConfig),
}

impl AlgorithmConfig {
    pub fn kind(&self) -> AlgorithmKind {
        match self {
            AlgorithmConfig::Mctspo(_) => AlgorithmKind::Mctspo,
            AlgorithmConfig::Deepga(_) => AlgorithmKind::Deepga,
        }
    }

    pub fn default_for(kind: AlgorithmKind) -> Self {
        match kind {
            AlgorithmKind::Mctspo => AlgorithmConfig::Mctspo(SearchConfig::default()),
            AlgorithmKind::Deepga => AlgorithmConfig::Deepga(GaConfig::default()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Mctspo(c) => c.validate(),
            AlgorithmConfig::Deepga(c) => c.validate(),
        }
    }
}

/// Hidden layers of the policy; input and output sizes come from the task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub algorithm: AlgorithmConfig,
    pub network: NetworkConfig,
    /// Environment calls per trial.
    pub budget: u64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Write measured wall-clock times into curve files. Off by default so
    /// reruns produce byte-identical output.
    #[serde(default)]
    pub record_wall_clock: bool,
}

pub const PAPER_HIDDEN: [usize; 3] = [128, 64, 32];
pub const PAPER_BUDGET: u64 = 5_000_000;
pub const DESK_HIDDEN: [usize; 2] = [32, 32];
pub const DESK_BUDGET: u64 = 500_000;

impl ExperimentConfig {
    /// Full-size defaults: 128/64/32 network, c = sqrt(2), k = alpha = 0.5,
    /// D_max = 1, n_ca = 4, horizon 100, 20 trials.
    pub fn paper(env: EnvKind, algorithm: AlgorithmKind) -> Self {
        ExperimentConfig {
            env: EnvSpec::for_kind(env),
            algorithm: AlgorithmConfig::default_for(algorithm),
            network: NetworkConfig {
                hidden_dims: PAPER_HIDDEN.to_vec(),
                activation: Activation::Tanh,
            },
            budget: PAPER_BUDGET,
            seeds: (0..20).collect(),
            output_dir: PathBuf::from("runs"),
            record_wall_clock: false,
        }
    }

    /// Laptop-scale preset: 32/32 network, 5e5 environment calls, 10 trials.
    pub fn desk(env: EnvKind, algorithm: AlgorithmKind) -> Self {
        ExperimentConfig {
            network: NetworkConfig {
                hidden_dims: DESK_HIDDEN.to_vec(),
                activation: Activation::Tanh,
            },
            budget: DESK_BUDGET,
            seeds: (0..10).collect(),
            ..Self::paper(env, algorithm)
        }
    }

    pub fn shape(&self) -> Arc<NetworkShape> {
        let mut shape = NetworkShape::mlp(
            self.env.observation_dim(),
            &self.network.hidden_dims,
            self.env.action_bounds.clone(),
        );
        shape.activation = self.network.activation;
        Arc::new(shape)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.algorithm.validate()?;
        self.shape().validate()?;
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one trial seed is required".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("trial seeds must be distinct".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Parse {
            what: format!("config {}", path.display()),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_match_documented_values() {
        let paper = ExperimentConfig::paper(EnvKind::SparseMountainCar, AlgorithmKind::Mctspo);
        paper.validate().unwrap();
        assert_eq!(paper.shape().hidden_dims, vec![128, 64, 32]);
        assert_eq!(paper.env.horizon, 100);
        let AlgorithmConfig::Mctspo(search) = &paper.algorithm else {
            panic!("expected a search config")
        };
        assert_eq!(search.exploration, std::f64::consts::SQRT_2);
        assert_eq!((search.widening_k, search.widening_alpha), (0.5, 0.5));
        assert_eq!(search.candidates, 4);
        assert_eq!(search.divergence.max_divergence, 1.0);

        let desk = ExperimentConfig::desk(EnvKind::SparseAcrobot, AlgorithmKind::Deepga);
        desk.validate().unwrap();
        assert_eq!(desk.budget, 500_000);
        assert_eq!(desk.shape().input_dim, 6);
        let AlgorithmConfig::Deepga(ga) = &desk.algorithm else {
            panic!("expected a GA config")
        };
        assert_eq!((ga.population_size, ga.truncation_size, ga.elite_count), (100, 20, 3));
    }

    #[test]
    fn config_roundtrips_and_rejects_bad_values() {
        let cfg = ExperimentConfig::desk(EnvKind::SparseMountainCar, AlgorithmKind::Mctspo);
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);

        let mut bad = cfg.clone();
        bad.budget = 0;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.seeds.clear();
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.seeds = vec![1, 1];
        assert!(bad.validate().is_err());
    }
}
