//! Gradient-free policy optimization by Monte-Carlo tree search in
//! parameter space, with a Deep GA baseline and sparse-reward control tasks.
//!
//! Module map:
//! - [`policy_net`]: deterministic MLP policies, forward and forward-mode JVP.
//! - [`genome`]: seed-chain genomes and the parameter-space transition.
//! - [`env`]: Sparse Mountain Car / Sparse Acrobot and the rollout engine.
//! - [`safe_mutation`]: output-divergence-bounded mutation magnitudes.
//! - [`search`]: the tree search.
//! - [`deepga`]: the genetic-algorithm baseline.
//! - [`harness`]: experiment configs, multi-seed trials, CSV/JSON output, replay.

pub mod curve;
pub mod deepga;
pub mod env;
pub mod error;
pub mod genome;
pub mod harness;
pub mod policy_net;
pub mod rng;
pub mod safe_mutation;
pub mod search;

pub use curve::{CurvePoint, RunResult};
pub use env::{Env, EnvKind, EnvSpec, Trajectory};
pub use error::{Error, Result};
pub use genome::{Genome, MutationAction};
pub use policy_net::{NetworkShape, ParameterVector};
