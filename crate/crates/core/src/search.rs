//! Monte-Carlo tree search over policy parameters.
//!
//! Nodes are parameter vectors, edges are seed/magnitude mutations. The
//! search uses progressive widening on actions, UCB selection, max-backup
//! of returns (the deterministic MaxUCT variant) and no-mutation rollouts:
//! a node's value estimate is the return of deploying its own policy once.
//! Candidate actions for a node are computed from the trajectory of its
//! first rollout and buffered, so expanding a node usually costs no extra
//! environment calls.
//!
//! The root is the all-zero network. Its candidate actions are network
//! initializations (seeds only), so its children form the first generation.
//!
//! Edge rewards `eta(s') - eta(s)` telescope along any path to the return of
//! the last node, so the search backs up rollout returns directly.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveRecorder, RunResult};
use crate::env::RolloutEnv;
use crate::error::{Error, Result};
use crate::genome::{self, Genome, MutationAction};
use crate::policy_net::{NetworkShape, ParameterVector};
use crate::rng;
use crate::safe_mutation::{get_candidate_actions, DivergenceBudget};

/// Consecutive simulations without any environment call after which a run
/// stops; only reachable when every leaf is barren or at the depth cap.
const MAX_IDLE_SIMULATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// UCB exploration constant `c`.
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    /// Progressive widening coefficient `k`.
    #[serde(default = "default_widening")]
    pub widening_k: f64,
    /// Progressive widening exponent `alpha`.
    #[serde(default = "default_widening")]
    pub widening_alpha: f64,
    /// Simulation cap; `None` runs until the environment-call budget is spent.
    #[serde(default)]
    pub iterations: Option<u64>,
    /// Candidate actions computed per trajectory (`n_ca`).
    #[serde(default = "default_n_ca")]
    pub candidates: usize,
    #[serde(default)]
    pub divergence: DivergenceBudget,
    /// Nodes at this depth are never expanded; `None` means unlimited.
    #[serde(default)]
    pub max_depth: Option<usize>,
}

fn default_exploration() -> f64 {
    std::f64::consts::SQRT_2
}

fn default_widening() -> f64 {
    0.5
}

fn default_n_ca() -> usize {
    4
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            exploration: default_exploration(),
            widening_k: default_widening(),
            widening_alpha: default_widening(),
            iterations: None,
            candidates: default_n_ca(),
            divergence: DivergenceBudget::default(),
            max_depth: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.exploration.is_finite() && self.exploration >= 0.0) {
            return Err(Error::Config("exploration constant must be non-negative".into()));
        }
        if !(self.widening_k.is_finite() && self.widening_k > 0.0) {
            return Err(Error::Config("widening k must be positive".into()));
        }
        if !(self.widening_alpha > 0.0 && self.widening_alpha <= 1.0) {
            return Err(Error::Config("widening alpha must lie in (0, 1]".into()));
        }
        if self.iterations == Some(0) {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.candidates == 0 {
            return Err(Error::Config("candidate count must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        self.divergence.validate()
    }
}

/// Statistics of one action at a node.
#[derive(Clone, Debug, PartialEq)]
pub struct ChildEdge {
    pub action: MutationAction,
    /// `N(s, a)`.
    pub visits: u64,
    /// `Q(s, a)`: the largest return ever backed up through this edge.
    pub value: f64,
    /// Arena index of the child node.
    pub child: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub depth: usize,
    /// `N(s)`. Zero on insertion; the inserting simulation's rollout is not a visit.
    pub visits: u64,
    pub children: Vec<ChildEdge>,
    /// Buffered candidate actions `CA(s)`.
    pub candidates: VecDeque<MutationAction>,
    /// Return of the node's own rollout, `eta(s)`.
    pub rollout_return: f64,
    pub reached_goal: bool,
    /// Candidate generation failed for every redrawn seed; never expanded.
    pub barren: bool,
    /// Trajectories sampled at this node (the insertion rollout plus refills).
    pub samples: u32,
}

/// Arena of nodes; index 0 is the root.
#[derive(Clone, Debug, Default)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &TreeNode {
        &self.nodes[index]
    }

    /// The edge leading into `index`, if it is not the root.
    pub fn incoming_edge(&self, index: usize) -> Option<&ChildEdge> {
        let parent = self.nodes[index].parent?;
        self.nodes[parent].children.iter().find(|e| e.child == index)
    }

    /// Action sequence from the root to `index`.
    pub fn genome(&self, shape: Arc<NetworkShape>, index: usize) -> Genome {
        let mut actions = Vec::with_capacity(self.nodes[index].depth);
        let mut cur = index;
        while let Some(edge) = self.incoming_edge(cur) {
            actions.push(edge.action);
            cur = self.nodes[cur].parent.unwrap_or(0);
        }
        actions.reverse();
        Genome::new(shape, actions).expect("tree paths always form valid genomes")
    }

    /// `eta(s)` in the policy-optimization MDP; the root is defined as zero.
    pub fn eta(&self, index: usize) -> f64 {
        if index == 0 {
            0.0
        } else {
            self.nodes[index].rollout_return
        }
    }

    /// Reward of the edge into `index`: `eta(s') - eta(s)`.
    pub fn edge_reward(&self, index: usize) -> Option<f64> {
        let parent = self.nodes[index].parent?;
        Some(self.eta(index) - self.eta(parent))
    }

    /// Undiscounted sum of edge rewards from the root to `index`.
    pub fn path_return(&self, index: usize) -> f64 {
        let mut rewards = Vec::new();
        let mut cur = index;
        while let Some(r) = self.edge_reward(cur) {
            rewards.push(r);
            cur = self.nodes[cur].parent.unwrap_or(0);
        }
        rewards.iter().rev().sum()
    }
}

/// True iff `children < k * visits^alpha`.
pub fn may_widen(children: usize, visits: u64, k: f64, alpha: f64) -> bool {
    (children as f64) < k * (visits as f64).powf(alpha)
}

/// Index of the child maximizing `Q + c * sqrt(ln N(s) / N(s, a))`; ties go
/// to the earliest-created child.
pub fn select_ucb(node: &TreeNode, c: f64) -> Result<usize> {
    ucb_argmax(&node.children, node.visits, c)
}

fn ucb_argmax(children: &[ChildEdge], parent_visits: u64, c: f64) -> Result<usize> {
    if children.is_empty() {
        return Err(Error::contract("UCB selection at a node without children"));
    }
    let log_n = (parent_visits as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, edge) in children.iter().enumerate() {
        if edge.visits == 0 {
            return Err(Error::contract("UCB selection over an unvisited child"));
        }
        let score = edge.value + c * (log_n / edge.visits as f64).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// One completed simulation: the edges it traversed (as child indices) with
/// their values after backup, and the return of the node it ended at.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRecord {
    pub edges: Vec<(usize, f64)>,
    pub leaf: usize,
    pub leaf_return: f64,
}

pub struct Search<E> {
    env: E,
    config: SearchConfig,
    shape: Arc<NetworkShape>,
    rng: ChaCha8Rng,
    tree: Tree,
    best: usize,
    simulations: u64,
    curve: CurveRecorder,
    first_goal_calls: Option<u64>,
    trace: Option<Vec<SimulationRecord>>,
}

struct Step {
    node: usize,
    edge: usize,
    created: bool,
}

impl<E: RolloutEnv> Search<E> {
    pub fn new(env: E, shape: Arc<NetworkShape>, config: SearchConfig, master_seed: u64) -> Result<Self> {
        config.validate()?;
        shape.validate()?;
        let curve = CurveRecorder::new(env.limit());
        Ok(Search {
            env,
            config,
            shape,
            rng: rng::master(master_seed),
            tree: Tree::default(),
            best: 0,
            simulations: 0,
            curve,
            first_goal_calls: None,
            trace: None,
        })
    }

    /// Keep a log of every completed simulation (for audits).
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn trace(&self) -> Option<&[SimulationRecord]> {
        self.trace.as_deref()
    }

    pub fn simulations(&self) -> u64 {
        self.simulations
    }

    pub fn best_index(&self) -> usize {
        self.best
    }

    /// One simulation from the root. On error nothing is committed to the
    /// tree statistics.
    pub fn simulate(&mut self) -> Result<f64> {
        let calls_before = self.env.calls();
        let mut params = ParameterVector::zeros(Arc::clone(&self.shape));
        if self.tree.is_empty() {
            self.tree.nodes.push(TreeNode {
                parent: None,
                depth: 0,
                visits: 0,
                children: Vec::new(),
                candidates: VecDeque::new(),
                rollout_return: 0.0,
                reached_goal: false,
                barren: false,
                samples: 0,
            });
            if let Err(e) = self.expand_new(0, &params) {
                self.tree.nodes.clear();
                return Err(e);
            }
            return Ok(self.finish(Vec::new(), 0, calls_before));
        }

        let mut path: Vec<Step> = Vec::new();
        let mut node = 0;
        loop {
            let n = &self.tree.nodes[node];
            if n.samples == 0 {
                // Inserted by this simulation: deploy its policy.
                if let Err(e) = self.expand_new(node, &params) {
                    self.rollback(&path);
                    return Err(e);
                }
                break;
            }
            let at_depth_cap = self.config.max_depth.is_some_and(|d| n.depth >= d);
            let visits = n.visits + 1;
            let widen = !n.barren
                && !at_depth_cap
                && may_widen(
                    n.children.len(),
                    visits,
                    self.config.widening_k,
                    self.config.widening_alpha,
                );
            if !widen && n.children.is_empty() {
                // Terminal for the search: value is the node's own return.
                break;
            }
            let (edge, created) = if widen {
                if self.tree.nodes[node].candidates.is_empty() {
                    if let Err(e) = self.refill(node, &params) {
                        self.rollback(&path);
                        return Err(e);
                    }
                }
                match self.tree.nodes[node].candidates.pop_front() {
                    Some(action) => (self.add_child(node, action), true),
                    // Refill found nothing; the node is barren from now on.
                    None if self.tree.nodes[node].children.is_empty() => break,
                    None => (
                        ucb_argmax(&self.tree.nodes[node].children, visits, self.config.exploration)?,
                        false,
                    ),
                }
            } else {
                (
                    ucb_argmax(&self.tree.nodes[node].children, visits, self.config.exploration)?,
                    false,
                )
            };
            let edge_ref = &self.tree.nodes[node].children[edge];
            let (action, child) = (edge_ref.action, edge_ref.child);
            params = match genome::step(&params, &action) {
                Ok(p) => p,
                Err(e) => {
                    path.push(Step { node, edge, created });
                    self.rollback(&path);
                    return Err(e);
                }
            };
            path.push(Step { node, edge, created });
            node = child;
        }
        Ok(self.finish(path, node, calls_before))
    }

    /// Commit a successful simulation: visit counts and max-backup.
    fn finish(&mut self, path: Vec<Step>, leaf: usize, calls_before: u64) -> f64 {
        let leaf_return = self.tree.nodes[leaf].rollout_return;
        let mut q = leaf_return;
        let mut edges = Vec::with_capacity(path.len());
        for step in path.iter().rev() {
            let node = &mut self.tree.nodes[step.node];
            node.visits += 1;
            let edge = &mut node.children[step.edge];
            edge.visits += 1;
            if q > edge.value {
                edge.value = q;
            }
            q = edge.value;
            edges.push((edge.child, edge.value));
        }
        edges.reverse();
        if let Some(trace) = &mut self.trace {
            trace.push(SimulationRecord {
                edges,
                leaf,
                leaf_return,
            });
        }
        if path.last().is_some_and(|s| s.created) && leaf_return > self.tree.nodes[self.best].rollout_return {
            self.best = leaf;
        }
        self.simulations += 1;
        let calls = self.env.calls();
        if calls > calls_before || self.simulations == 1 {
            self.curve.observe(calls, self.tree.nodes[self.best].rollout_return);
        }
        q
    }

    fn rollback(&mut self, path: &[Step]) {
        if let Some(last) = path.last().filter(|s| s.created) {
            let parent = &mut self.tree.nodes[last.node];
            let edge = parent.children.pop().expect("created edge is the newest");
            parent.candidates.push_front(edge.action);
            debug_assert_eq!(edge.child, self.tree.nodes.len() - 1);
            self.tree.nodes.pop();
        }
    }

    fn add_child(&mut self, node: usize, action: MutationAction) -> usize {
        let child = self.tree.nodes.len();
        let depth = self.tree.nodes[node].depth + 1;
        self.tree.nodes.push(TreeNode {
            parent: Some(node),
            depth,
            visits: 0,
            children: Vec::new(),
            candidates: VecDeque::new(),
            rollout_return: f64::NEG_INFINITY,
            reached_goal: false,
            barren: false,
            samples: 0,
        });
        let children = &mut self.tree.nodes[node].children;
        children.push(ChildEdge {
            action,
            visits: 0,
            value: f64::NEG_INFINITY,
            child,
        });
        children.len() - 1
    }

    /// Rollout of a freshly inserted node followed by its candidate actions.
    fn expand_new(&mut self, node: usize, params: &ParameterVector) -> Result<()> {
        let traj = self.env.rollout(params)?;
        if traj.reached_goal && self.first_goal_calls.is_none() {
            self.first_goal_calls = Some(self.env.calls());
        }
        let n = &mut self.tree.nodes[node];
        n.rollout_return = traj.total_return;
        n.reached_goal = traj.reached_goal;
        n.samples = 1;
        self.fill_candidates(node, params, &traj)
    }

    /// Re-samples a trajectory for a node whose candidate buffer ran dry.
    fn refill(&mut self, node: usize, params: &ParameterVector) -> Result<()> {
        if node == 0 {
            let seeds = self.draw_init_actions();
            self.tree.nodes[0].candidates.extend(seeds);
            return Ok(());
        }
        let traj = self.env.rollout(params)?;
        self.tree.nodes[node].samples += 1;
        self.fill_candidates(node, params, &traj)
    }

    fn fill_candidates(&mut self, node: usize, params: &ParameterVector, traj: &crate::env::Trajectory) -> Result<()> {
        if node == 0 {
            let seeds = self.draw_init_actions();
            self.tree.nodes[0].candidates.extend(seeds);
            return Ok(());
        }
        match get_candidate_actions(
            params,
            traj,
            self.config.candidates,
            &self.config.divergence,
            &mut self.rng,
        ) {
            Ok(actions) => {
                self.tree.nodes[node].candidates.extend(actions);
                Ok(())
            }
            Err(Error::CandidateGenerationFailed { attempts }) => {
                log::debug!("node {node}: no usable mutation direction after {attempts} seeds; marking barren");
                self.tree.nodes[node].barren = true;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    fn draw_init_actions(&mut self) -> Vec<MutationAction> {
        (0..self.config.candidates)
            .map(|_| MutationAction::init(self.rng.random()))
            .collect()
    }

    /// Simulates until the iteration cap or the environment budget is reached.
    pub fn run(mut self) -> Result<RunResult> {
        if self.config.iterations.is_none() && self.env.limit().is_none() {
            return Err(Error::Config(
                "a search needs an iteration cap or an environment budget".into(),
            ));
        }
        let mut idle = 0;
        while self.config.iterations.map_or(true, |cap| self.simulations < cap) {
            let before = self.env.calls();
            match self.simulate() {
                Ok(_) => {}
                Err(Error::BudgetExhausted { .. }) => break,
                Err(e) => return Err(e),
            }
            if self.env.calls() == before {
                idle += 1;
                if idle >= MAX_IDLE_SIMULATIONS {
                    log::warn!("search stalled: {idle} simulations without environment calls");
                    break;
                }
            } else {
                idle = 0;
            }
        }
        Ok(self.into_result())
    }

    pub fn into_result(self) -> RunResult {
        let best = self.best;
        let (best_return, best_reached_goal) = match self.tree.nodes.get(best) {
            Some(n) => (n.rollout_return, n.reached_goal),
            None => (f64::NEG_INFINITY, false),
        };
        let best_genome = if self.tree.is_empty() {
            Genome::root(Arc::clone(&self.shape))
        } else {
            self.tree.genome(Arc::clone(&self.shape), best)
        };
        RunResult {
            best_genome,
            best_return,
            best_reached_goal,
            curve: self.curve.finish(),
            env_calls: self.env.calls(),
            iterations: self.simulations,
            first_goal_calls: self.first_goal_calls,
        }
    }
}

/// Convenience wrapper: build a search and run it to completion.
pub fn run<E: RolloutEnv>(
    env: E,
    shape: Arc<NetworkShape>,
    config: SearchConfig,
    master_seed: u64,
) -> Result<RunResult> {
    Search::new(env, shape, config, master_seed)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(value: f64, visits: u64) -> ChildEdge {
        ChildEdge {
            action: MutationAction::init(0),
            visits,
            value,
            child: 0,
        }
    }

    fn node_with(children: Vec<ChildEdge>, visits: u64) -> TreeNode {
        TreeNode {
            parent: None,
            depth: 0,
            visits,
            children,
            candidates: VecDeque::new(),
            rollout_return: 0.0,
            reached_goal: false,
            barren: false,
            samples: 1,
        }
    }

    #[test]
    fn widening_bound_examples() {
        assert!(may_widen(0, 1, 0.3, 0.3));
        assert!(!may_widen(1, 1, 0.3, 0.3));
        assert!(may_widen(1, 16, 0.5, 0.5));
        assert!(!may_widen(2, 16, 0.5, 0.5));
        assert!(!may_widen(0, 0, 0.5, 0.5));
    }

    #[test]
    fn ucb_greedy_without_exploration() {
        let node = node_with(vec![edge(0.1, 5), edge(0.7, 1), edge(0.3, 9)], 15);
        assert_eq!(select_ucb(&node, 0.0).unwrap(), 1);
    }

    #[test]
    fn ucb_single_child_has_no_bonus() {
        let node = node_with(vec![edge(-0.2, 1)], 1);
        assert_eq!(select_ucb(&node, std::f64::consts::SQRT_2).unwrap(), 0);
    }

    #[test]
    fn ucb_ties_prefer_earliest_child() {
        let node = node_with(vec![edge(0.5, 2), edge(0.5, 2)], 4);
        assert_eq!(select_ucb(&node, 1.0).unwrap(), 0);
    }

    #[test]
    fn ucb_matches_exhaustive_scoring() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = std::f64::consts::SQRT_2;
        for _ in 0..50 {
            let children: Vec<ChildEdge> = (0..5)
                .map(|_| edge(rng.random_range(-0.1..1.0), rng.random_range(1..20)))
                .collect();
            let total: u64 = children.iter().map(|e| e.visits).sum();
            let node = node_with(children.clone(), total);
            let scores: Vec<f64> = children
                .iter()
                .map(|e| e.value + c * ((total as f64).ln() / e.visits as f64).sqrt())
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let expected = scores.iter().position(|&s| s == max).unwrap();
            assert_eq!(select_ucb(&node, c).unwrap(), expected);
        }
    }

    #[test]
    fn ucb_contract_errors() {
        assert!(select_ucb(&node_with(vec![], 3), 1.0).is_err());
        assert!(select_ucb(&node_with(vec![edge(0.0, 0)], 3), 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig {
            widening_alpha: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchConfig {
            candidates: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_defaults_from_json() {
        let cfg: SearchConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, SearchConfig::default());
        assert_eq!(cfg.exploration, std::f64::consts::SQRT_2);
        assert_eq!(cfg.candidates, 4);
        assert_eq!(cfg.divergence.max_divergence, 1.0);
    }
}
