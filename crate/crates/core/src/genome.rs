//! Seed-chain genomes and the deterministic transition of the
//! policy-optimization MDP.
//!
//! A genome is the ordered list of actions leading from the search root to
//! a node. The first action initializes a network from its seed; every
//! later action adds `magnitude * direction_from_seed(seed)` to the
//! parameters. The empty genome denotes the search root itself, whose
//! parameters are all zero.

use std::path::Path;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::policy_net::{NetworkShape, ParameterVector};
use crate::rng::{self, Stream};

pub const GENOME_FORMAT_VERSION: u32 = 1;

/// One action of the policy-optimization MDP: a seed and a step magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationAction {
    pub seed: u64,
    /// Euclidean step length. Always zero for initialization actions.
    pub magnitude: f64,
    is_init: bool,
}

impl MutationAction {
    pub fn init(seed: u64) -> Self {
        MutationAction {
            seed,
            magnitude: 0.0,
            is_init: true,
        }
    }

    pub fn mutation(seed: u64, magnitude: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::contract(format!(
                "mutation magnitude must be finite and non-negative, got {magnitude}"
            )));
        }
        Ok(MutationAction {
            seed,
            magnitude,
            is_init: false,
        })
    }

    pub fn is_init(&self) -> bool {
        self.is_init
    }
}

/// Standard-normal sample of length `dim` from the direction stream of `seed`.
pub fn gaussian_from_seed(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, Stream::Direction);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Unit-length mutation direction for `seed` in a `dim`-dimensional
/// parameter space.
pub fn direction_from_seed(seed: u64, dim: usize) -> Vec<f64> {
    let mut d = gaussian_from_seed(seed, dim);
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        d.iter_mut().for_each(|x| *x /= norm);
    }
    d
}

pub fn apply_mutation(params: &ParameterVector, action: &MutationAction) -> Result<ParameterVector> {
    if action.is_init {
        return Err(Error::contract("initialization action applied as a mutation"));
    }
    if action.magnitude == 0.0 {
        return Ok(params.clone());
    }
    let direction = direction_from_seed(action.seed, params.len());
    params.offset(&direction, action.magnitude)
}

/// Compact encoding of an individual: network shape plus action chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    shape: Arc<NetworkShape>,
    actions: Vec<MutationAction>,
}

impl Genome {
    /// The search root: zero parameters, no actions.
    pub fn root(shape: Arc<NetworkShape>) -> Self {
        Genome {
            shape,
            actions: Vec::new(),
        }
    }

    pub fn from_seed(shape: Arc<NetworkShape>, seed: u64) -> Self {
        Genome {
            shape,
            actions: vec![MutationAction::init(seed)],
        }
    }

    pub fn new(shape: Arc<NetworkShape>, actions: Vec<MutationAction>) -> Result<Self> {
        let genome = Genome { shape, actions };
        genome.validate()?;
        Ok(genome)
    }

    fn validate(&self) -> Result<()> {
        for (i, a) in self.actions.iter().enumerate() {
            if a.is_init != (i == 0) {
                return Err(Error::contract(format!(
                    "action {i} is {} but only the first action may initialize",
                    if a.is_init { "an initialization" } else { "a mutation" }
                )));
            }
            if !(a.magnitude.is_finite() && a.magnitude >= 0.0) {
                return Err(Error::contract(format!(
                    "action {i} has invalid magnitude {}",
                    a.magnitude
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> &Arc<NetworkShape> {
        &self.shape
    }

    pub fn actions(&self) -> &[MutationAction] {
        &self.actions
    }

    /// Number of actions, i.e. the distance from the search root.
    pub fn depth(&self) -> usize {
        self.actions.len()
    }

    /// Genome of the child reached by taking `action` from this node.
    pub fn child(&self, action: MutationAction) -> Result<Genome> {
        if action.is_init != self.actions.is_empty() {
            return Err(Error::contract(if action.is_init {
                "initialization action below the first generation"
            } else {
                "mutation action applied to the search root"
            }));
        }
        let mut actions = Vec::with_capacity(self.actions.len() + 1);
        actions.extend_from_slice(&self.actions);
        actions.push(action);
        Ok(Genome {
            shape: Arc::clone(&self.shape),
            actions,
        })
    }

    /// Rebuild the parameter vector by replaying every action from the root.
    pub fn materialize(&self) -> Result<ParameterVector> {
        let mut params = ParameterVector::zeros(Arc::clone(&self.shape));
        for action in &self.actions {
            params = step(&params, action)?;
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GenomeFile {
            format_version: GENOME_FORMAT_VERSION,
            shape: (*self.shape).clone(),
            actions: self
                .actions
                .iter()
                .map(|a| ActionRecord {
                    seed: a.seed,
                    magnitude: a.magnitude,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|source| Error::Parse {
            what: "genome".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Genome> {
        let file: GenomeFile = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "genome".into(),
            source,
        })?;
        if file.format_version != GENOME_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported genome format version {}",
                file.format_version
            )));
        }
        file.shape.validate()?;
        let actions = file
            .actions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if i == 0 {
                    Ok(MutationAction::init(r.seed))
                } else {
                    MutationAction::mutation(r.seed, r.magnitude)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Genome::new(Arc::new(file.shape), actions)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Genome> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Genome::from_json(&text)
    }
}

/// Transition function of the policy-optimization MDP.
pub fn step(params: &ParameterVector, action: &MutationAction) -> Result<ParameterVector> {
    if action.is_init {
        Ok(ParameterVector::init_from_seed(Arc::clone(params.shape()), action.seed))
    } else {
        check_dim("parameter vector", params.shape().parameter_count(), params.len())?;
        apply_mutation(params, action)
    }
}

#[derive(Serialize, Deserialize)]
struct GenomeFile {
    format_version: u32,
    shape: NetworkShape,
    actions: Vec<ActionRecord>,
}

#[derive(Serialize, Deserialize)]
struct ActionRecord {
    seed: u64,
    magnitude: f64,
}
