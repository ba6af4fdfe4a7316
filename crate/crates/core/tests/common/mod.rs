#![allow(dead_code)]

use std::collections::HashMap;

use mctspo::env::{RolloutEnv, Transition};
use mctspo::search::{SimulationRecord, Tree};
use mctspo::{Error, ParameterVector, Result, Trajectory};

/// Cheap deterministic stand-in for a task: a fixed sequence of observations,
/// and a return that rewards matching a target output profile.
pub struct StubEnv {
    pub steps: usize,
    pub calls: u64,
    pub limit: Option<u64>,
}

impl StubEnv {
    pub fn new(steps: usize, limit: Option<u64>) -> Self {
        StubEnv { steps, calls: 0, limit }
    }

    pub fn observation(t: usize) -> [f64; 2] {
        let t = t as f64;
        [(0.9 * t).sin(), (0.4 * t).cos()]
    }

    fn target(t: usize) -> f64 {
        0.8 * (0.5 * t as f64).sin()
    }
}

impl RolloutEnv for StubEnv {
    fn rollout(&mut self, params: &ParameterVector) -> Result<Trajectory> {
        if let Some(limit) = self.limit {
            if self.calls >= limit {
                return Err(Error::BudgetExhausted { limit });
            }
        }
        let mut transitions = Vec::with_capacity(self.steps);
        let mut total = 0.0;
        for t in 0..self.steps {
            let obs = Self::observation(t);
            let action = params.forward(&obs)?;
            let reward = -(action[0] - Self::target(t)).powi(2);
            total += reward;
            transitions.push(Transition {
                observation: obs.to_vec(),
                action,
                reward,
                next_observation: Self::observation(t + 1).to_vec(),
            });
        }
        self.calls += self.steps as u64;
        Ok(Trajectory {
            transitions,
            total_return: total,
            reached_goal: false,
        })
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn limit(&self) -> Option<u64> {
        self.limit
    }
}

/// Checks a finished tree against the log of every simulation that built it.
/// Returns one message per violated property.
pub fn tree_violations(tree: &Tree, trace: &[SimulationRecord], k: f64, alpha: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let nodes = tree.nodes();
    let parent_of = |child: usize| nodes[child].parent.expect("edges lead to non-root nodes");

    for (i, n) in nodes.iter().enumerate().skip(1) {
        let p = n.parent.unwrap();
        if p >= i || n.depth != nodes[p].depth + 1 {
            bad.push(format!("node {i}: inconsistent parent/depth"));
        }
    }

    // Replay the log in order.
    let mut interior_visits = vec![0u64; nodes.len()];
    let mut edge_visits: HashMap<usize, u64> = HashMap::new();
    let mut edge_max: HashMap<usize, f64> = HashMap::new();
    let mut last_q: HashMap<usize, f64> = HashMap::new();
    let mut seen = vec![false; nodes.len()];
    seen[0] = true;
    for (sim, rec) in trace.iter().enumerate() {
        if rec.leaf_return != nodes[rec.leaf].rollout_return {
            bad.push(format!("sim {sim}: leaf return differs from the node's rollout"));
        }
        if let Some(&(last, _)) = rec.edges.last() {
            if last != rec.leaf {
                bad.push(format!("sim {sim}: path does not end at its leaf"));
            }
        }
        for &(child, q) in &rec.edges {
            let parent = parent_of(child);
            if !seen[child] {
                // A widening event: strict bound on the pre-insertion count.
                seen[child] = true;
                let siblings_before = nodes[parent].children.iter().filter(|e| e.child < child).count();
                let n_s = interior_visits[parent] + 1;
                if !((siblings_before as f64) < k * (n_s as f64).powf(alpha)) {
                    bad.push(format!(
                        "sim {sim}: widened node {parent} with {siblings_before} children at N = {n_s}"
                    ));
                }
            }
            interior_visits[parent] += 1;
            *edge_visits.entry(child).or_default() += 1;
            let m = edge_max.entry(child).or_insert(f64::NEG_INFINITY);
            *m = m.max(rec.leaf_return);
            if q != *m {
                bad.push(format!("sim {sim}: Q into node {child} is {q}, oracle max {m}"));
            }
            if let Some(prev) = last_q.insert(child, q) {
                if q < prev {
                    bad.push(format!("sim {sim}: Q into node {child} decreased"));
                }
            }
        }
    }

    for (i, n) in nodes.iter().enumerate() {
        if n.visits != interior_visits[i] {
            bad.push(format!("node {i}: N = {}, log says {}", n.visits, interior_visits[i]));
        }
        let sum: u64 = n.children.iter().map(|e| e.visits).sum();
        if n.visits != sum {
            bad.push(format!("node {i}: N = {} but sum of N(s,a) = {sum}", n.visits));
        }
        if !n.children.is_empty() {
            let bound = k * (n.visits as f64).powf(alpha);
            if !(((n.children.len() - 1) as f64) < bound) {
                bad.push(format!(
                    "node {i}: {} children exceeds widening bound {bound}",
                    n.children.len()
                ));
            }
        }
        for e in &n.children {
            if e.visits != edge_visits.get(&e.child).copied().unwrap_or(0) {
                bad.push(format!("edge into {}: N(s,a) disagrees with the log", e.child));
            }
            if Some(&e.value) != edge_max.get(&e.child) {
                bad.push(format!(
                    "edge into {}: Q disagrees with the max of logged returns",
                    e.child
                ));
            }
        }
    }
    bad
}
