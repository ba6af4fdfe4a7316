//! Safe mutation: choose the step magnitude along a random direction so the
//! mean squared change of the policy outputs over a sampled trajectory stays
//! within a budget.
//!
//! The curvature term is the Gauss-Newton form of the divergence at the
//! parent, which equals its Hessian there because the residuals vanish:
//! `q = (2/T) * sum_t |J_t d|^2`, with `J_t d` computed by forward-mode
//! differentiation. `U` is never materialized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Trajectory;
use crate::error::{check_dim, Error, Result};
use crate::genome::{direction_from_seed, MutationAction};
use crate::policy_net::{ParameterVector, Scratch};

/// Curvature below which a direction is treated as lying in the output null-space.
pub const CURVATURE_FLOOR: f64 = 1e-12;

/// Fresh seeds tried per requested candidate before giving up.
const REDRAWS_PER_CANDIDATE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBudget {
    /// Largest allowed output divergence of one mutation (`D_max`).
    pub max_divergence: f64,
    /// Backtracking factor applied to the magnitude, in `(0, 1)`.
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    /// Cap on divergence evaluations per line search.
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_shrink() -> f64 {
    0.5
}

fn default_max_iterations() -> usize {
    20
}

impl Default for DivergenceBudget {
    fn default() -> Self {
        DivergenceBudget {
            max_divergence: 1.0,
            shrink: default_shrink(),
            max_iterations: default_max_iterations(),
        }
    }
}

impl DivergenceBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_divergence.is_finite() && self.max_divergence > 0.0) {
            return Err(Error::Config("max_divergence must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config("line-search shrink factor must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("line search needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Parent outputs along a trajectory, cached for repeated divergence checks.
struct Probe<'a> {
    old: &'a ParameterVector,
    traj: &'a Trajectory,
    old_outputs: Vec<f64>,
    scratch: Scratch,
}

impl<'a> Probe<'a> {
    fn new(old: &'a ParameterVector, traj: &'a Trajectory) -> Result<Self> {
        if traj.is_empty() {
            return Err(Error::contract("divergence needs a non-empty trajectory"));
        }
        let k = old.shape().output_dim;
        let mut scratch = Scratch::new(old.shape());
        let mut old_outputs = vec![0.0; traj.len() * k];
        for (obs, out) in traj.observations().zip(old_outputs.chunks_exact_mut(k)) {
            old.forward_into(obs, &mut scratch, out)?;
        }
        Ok(Probe {
            old,
            traj,
            old_outputs,
            scratch,
        })
    }

    fn divergence(&mut self, new: &ParameterVector) -> Result<f64> {
        check_dim("parameter vector", self.old.len(), new.len())?;
        let k = self.old.shape().output_dim;
        let mut out = vec![0.0; k];
        let mut total = 0.0;
        for (obs, old_out) in self.traj.observations().zip(self.old_outputs.chunks_exact(k)) {
            new.forward_into(obs, &mut self.scratch, &mut out)?;
            total += out.iter().zip(old_out).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / self.traj.len() as f64)
    }

    fn quadratic_form(&mut self, direction: &[f64]) -> Result<f64> {
        check_dim("direction", self.old.len(), direction.len())?;
        if direction.iter().any(|d| !d.is_finite()) {
            return Err(Error::contract("direction contains non-finite entries"));
        }
        let mut jvp = vec![0.0; self.old.shape().output_dim];
        let mut total = 0.0;
        for obs in self.traj.observations() {
            self.old.jvp_into(obs, direction, &mut self.scratch, &mut jvp)?;
            total += jvp.iter().map(|j| j * j).sum::<f64>();
        }
        Ok(2.0 * total / self.traj.len() as f64)
    }
}

/// Mean over the trajectory's observations of the squared output difference
/// between `new` and `old`.
pub fn divergence(new: &ParameterVector, old: &ParameterVector, traj: &Trajectory) -> Result<f64> {
    Probe::new(old, traj)?.divergence(new)
}

/// `d^T U d`, the curvature of the divergence along `direction` at `old`.
pub fn quadratic_form(old: &ParameterVector, traj: &Trajectory, direction: &[f64]) -> Result<f64> {
    Probe::new(old, traj)?.quadratic_form(direction)
}

/// Magnitude that puts the quadratic model exactly on the budget:
/// `v = sqrt(2 * D_max / q)`.
pub fn solve_magnitude(q: f64, budget: &DivergenceBudget) -> Result<f64> {
    if !(q > CURVATURE_FLOOR) {
        return Err(Error::DegenerateDirection { q });
    }
    Ok((2.0 * budget.max_divergence / q).sqrt())
}

/// Result of one backtracking line search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchOutcome {
    pub action: MutationAction,
    /// Divergence of the accepted step.
    pub divergence: f64,
    /// Divergence evaluations performed.
    pub evaluations: usize,
    /// True when the iteration cap was hit without satisfying the budget; the
    /// action then carries the smallest magnitude tried.
    pub capped: bool,
}

pub fn line_search_magnitude(
    old: &ParameterVector,
    traj: &Trajectory,
    seed: u64,
    budget: &DivergenceBudget,
) -> Result<LineSearchOutcome> {
    let mut probe = Probe::new(old, traj)?;
    let direction = direction_from_seed(seed, old.len());
    let q = probe.quadratic_form(&direction)?;
    let v0 = solve_magnitude(q, budget)?;
    backtrack(&mut probe, &direction, seed, v0, budget)
}

/// Line search starting from an explicit initial magnitude instead of the
/// quadratic-model solution.
pub fn line_search_from(
    old: &ParameterVector,
    traj: &Trajectory,
    seed: u64,
    initial_magnitude: f64,
    budget: &DivergenceBudget,
) -> Result<LineSearchOutcome> {
    let mut probe = Probe::new(old, traj)?;
    let direction = direction_from_seed(seed, old.len());
    backtrack(&mut probe, &direction, seed, initial_magnitude, budget)
}

fn backtrack(
    probe: &mut Probe<'_>,
    direction: &[f64],
    seed: u64,
    initial_magnitude: f64,
    budget: &DivergenceBudget,
) -> Result<LineSearchOutcome> {
    let mut v = initial_magnitude;
    let mut last = f64::NAN;
    for evaluation in 1..=budget.max_iterations {
        let candidate = probe.old.offset(direction, v)?;
        last = probe.divergence(&candidate)?;
        if last <= budget.max_divergence {
            return Ok(LineSearchOutcome {
                action: MutationAction::mutation(seed, v)?,
                divergence: last,
                evaluations: evaluation,
                capped: false,
            });
        }
        if evaluation < budget.max_iterations {
            v *= budget.shrink;
        }
    }
    log::warn!(
        "line search hit its cap of {} evaluations (seed {seed}, divergence {last:.4})",
        budget.max_iterations
    );
    Ok(LineSearchOutcome {
        action: MutationAction::mutation(seed, v)?,
        divergence: last,
        evaluations: budget.max_iterations,
        capped: true,
    })
}

/// Draws `n_ca` fresh seeds and line-searches a safe magnitude for each.
/// Seeds whose direction is degenerate, or whose line search never meets the
/// budget, are skipped and redrawn.
pub fn get_candidate_actions<R: Rng + ?Sized>(
    params: &ParameterVector,
    traj: &Trajectory,
    n_ca: usize,
    budget: &DivergenceBudget,
    rng: &mut R,
) -> Result<Vec<MutationAction>> {
    let mut probe = Probe::new(params, traj)?;
    let max_attempts = n_ca * REDRAWS_PER_CANDIDATE;
    let mut candidates: Vec<MutationAction> = Vec::with_capacity(n_ca);
    let mut attempts = 0;
    while candidates.len() < n_ca {
        if attempts == max_attempts {
            return Err(Error::CandidateGenerationFailed { attempts });
        }
        attempts += 1;
        let seed: u64 = rng.random();
        if candidates.iter().any(|c| c.seed == seed) {
            continue;
        }
        let direction = direction_from_seed(seed, params.len());
        let q = probe.quadratic_form(&direction)?;
        let v0 = match solve_magnitude(q, budget) {
            Ok(v) => v,
            Err(Error::DegenerateDirection { q }) => {
                log::debug!("redrawing degenerate seed {seed} (q = {q:e})");
                continue;
            }
            Err(e) => return Err(e),
        };
        let outcome = backtrack(&mut probe, &direction, seed, v0, budget)?;
        if outcome.capped {
            continue;
        }
        candidates.push(outcome.action);
    }
    Ok(candidates)
}
