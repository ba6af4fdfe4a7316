//! Best-so-far learning curves.

use std::time::Instant;

use crate::genome::Genome;

/// Outcome of one search or GA run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub best_genome: Genome,
    pub best_return: f64,
    pub best_reached_goal: bool,
    pub curve: Vec<CurvePoint>,
    pub env_calls: u64,
    /// Simulations (search) or generations (GA) completed.
    pub iterations: u64,
    /// Environment calls used when a goal-reaching rollout was first seen.
    pub first_goal_calls: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub env_calls: u64,
    pub best_return: f64,
    pub wall_ms: u64,
}

/// Records a point whenever the best return improves and whenever the
/// environment-call count passes a checkpoint (every 1% of the budget).
/// Points are strictly increasing in `env_calls`: a later point at the same
/// call count replaces the earlier one.
#[derive(Debug)]
pub struct CurveRecorder {
    points: Vec<CurvePoint>,
    best: f64,
    checkpoint_every: Option<u64>,
    next_checkpoint: u64,
    started: Instant,
}

impl CurveRecorder {
    pub fn new(budget: Option<u64>) -> Self {
        let checkpoint_every = budget.map(|b| (b / 100).max(1));
        CurveRecorder {
            points: Vec::new(),
            best: f64::NEG_INFINITY,
            checkpoint_every,
            next_checkpoint: checkpoint_every.unwrap_or(u64::MAX),
            started: Instant::now(),
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Reports the best return known after `env_calls` environment calls.
    pub fn observe(&mut self, env_calls: u64, best_return: f64) {
        let improved = best_return > self.best;
        if improved {
            self.best = best_return;
        }
        let checkpoint = env_calls >= self.next_checkpoint;
        if checkpoint {
            let every = self.checkpoint_every.unwrap_or(u64::MAX);
            self.next_checkpoint = (env_calls / every + 1).saturating_mul(every);
        }
        if !(improved || checkpoint || self.points.is_empty()) {
            return;
        }
        let point = CurvePoint {
            env_calls,
            best_return: self.best,
            wall_ms: self.started.elapsed().as_millis() as u64,
        };
        match self.points.last_mut() {
            Some(last) if last.env_calls == env_calls => *last = point,
            Some(last) if last.env_calls > env_calls => {}
            _ => self.points.push(point),
        }
    }

    pub fn finish(self) -> Vec<CurvePoint> {
        self.points
    }
}
