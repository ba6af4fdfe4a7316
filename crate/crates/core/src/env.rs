//! Deterministic sparse-reward control tasks and the rollout engine.
//!
//! Both tasks share one reward: `1.0` on the step that reaches the goal
//! (which also ends the episode), otherwise `-control_penalty * |a|_1`.
//! Applying zero control therefore earns exactly zero, a deceptive local
//! optimum that every goal-reaching policy must climb out of.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::policy_net::{ParameterVector, Scratch};

pub const DEFAULT_HORIZON: usize = 100;
pub const DEFAULT_CONTROL_PENALTY: f64 = 0.001;
pub const DEFAULT_CAR_POWER: f64 = 0.0015;
pub const DEFAULT_Y_GOAL: f64 = 1.999;

/// Task family plus its difficulty parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    SparseMountainCar {
        /// Acceleration per unit of action (`p_car`).
        power: f64,
    },
    SparseAcrobot {
        /// Tip height that counts as reaching the goal. The maximum is 2.
        y_goal: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    SparseMountainCar,
    SparseAcrobot,
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse-mountain-car" => Ok(EnvKind::SparseMountainCar),
            "sparse-acrobot" => Ok(EnvKind::SparseAcrobot),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnvKind::SparseMountainCar => "sparse-mountain-car",
            EnvKind::SparseAcrobot => "sparse-acrobot",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub task: Task,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_penalty")]
    pub control_penalty: f64,
    /// Symmetric bound per action dimension.
    #[serde(default = "default_bounds")]
    pub action_bounds: Vec<f64>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_penalty() -> f64 {
    DEFAULT_CONTROL_PENALTY
}

fn default_bounds() -> Vec<f64> {
    vec![1.0]
}

impl EnvSpec {
    pub fn sparse_mountain_car() -> Self {
        EnvSpec {
            task: Task::SparseMountainCar {
                power: DEFAULT_CAR_POWER,
            },
            horizon: DEFAULT_HORIZON,
            control_penalty: DEFAULT_CONTROL_PENALTY,
            action_bounds: default_bounds(),
        }
    }

    pub fn sparse_acrobot() -> Self {
        EnvSpec {
            task: Task::SparseAcrobot { y_goal: DEFAULT_Y_GOAL },
            horizon: DEFAULT_HORIZON,
            control_penalty: DEFAULT_CONTROL_PENALTY,
            action_bounds: default_bounds(),
        }
    }

    pub fn for_kind(kind: EnvKind) -> Self {
        match kind {
            EnvKind::SparseMountainCar => Self::sparse_mountain_car(),
            EnvKind::SparseAcrobot => Self::sparse_acrobot(),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self.task {
            Task::SparseMountainCar { .. } => EnvKind::SparseMountainCar,
            Task::SparseAcrobot { .. } => EnvKind::SparseAcrobot,
        }
    }

    pub fn observation_dim(&self) -> usize {
        match self.task {
            Task::SparseMountainCar { .. } => 2,
            Task::SparseAcrobot { .. } => 6,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.action_bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(self.control_penalty.is_finite() && self.control_penalty >= 0.0) {
            return Err(Error::Config("control penalty must be finite and non-negative".into()));
        }
        check_dim("action bounds", 1, self.action_bounds.len())?;
        if self.action_bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::Config("action bounds must be finite and positive".into()));
        }
        match self.task {
            Task::SparseMountainCar { power } if !(power.is_finite() && power > 0.0) => {
                Err(Error::Config("car power must be positive".into()))
            }
            Task::SparseAcrobot { y_goal } if !y_goal.is_finite() => Err(Error::Config("y_goal must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Largest per-step penalty magnitude, `c_pen * |a_max|_1`.
    pub fn max_step_penalty(&self) -> f64 {
        self.control_penalty * self.action_bounds.iter().sum::<f64>()
    }
}

/// Physical state of a task plus the step index.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskState {
    /// Mountain Car: `[x, x_dot]`. Acrobot: `[theta1, theta2, theta1_dot, theta2_dot]`.
    pub values: Vec<f64>,
    pub step_index: usize,
    pub done: bool,
}

impl TaskState {
    /// What the policy sees.
    pub fn observation(&self, spec: &EnvSpec) -> Vec<f64> {
        match spec.task {
            Task::SparseMountainCar { .. } => self.values.clone(),
            Task::SparseAcrobot { .. } => {
                let (t1, t2) = (self.values[0], self.values[1]);
                vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), self.values[2], self.values[3]]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: TaskState,
    pub reward: f64,
    pub done: bool,
    pub reached_goal: bool,
}

pub fn reset(spec: &EnvSpec) -> TaskState {
    let values = match spec.task {
        Task::SparseMountainCar { .. } => vec![-0.5, 0.0],
        Task::SparseAcrobot { .. } => vec![0.0; 4],
    };
    TaskState {
        values,
        step_index: 0,
        done: false,
    }
}

pub fn step(spec: &EnvSpec, state: &TaskState, action: &[f64]) -> Result<StepOutcome> {
    if state.done || state.step_index >= spec.horizon {
        return Err(Error::contract("step called on a finished episode"));
    }
    check_dim("action", spec.action_dim(), action.len())?;
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::contract("non-finite action"));
    }
    let clamped: Vec<f64> = action
        .iter()
        .zip(&spec.action_bounds)
        .map(|(a, b)| a.clamp(-b, *b))
        .collect();

    let (values, reached_goal) = match spec.task {
        Task::SparseMountainCar { power } => mountain_car::step(&state.values, clamped[0], power),
        Task::SparseAcrobot { y_goal } => acrobot::step(&state.values, clamped[0], y_goal),
    };
    let step_index = state.step_index + 1;
    let (reward, done) = if reached_goal {
        (1.0, true)
    } else {
        let l1: f64 = clamped.iter().map(|a| a.abs()).sum();
        (-spec.control_penalty * l1, step_index == spec.horizon)
    };
    Ok(StepOutcome {
        state: TaskState {
            values,
            step_index,
            done,
        },
        reward,
        done,
        reached_goal,
    })
}

mod mountain_car {
    const MIN_POSITION: f64 = -1.2;
    const MAX_POSITION: f64 = 0.6;
    const MAX_SPEED: f64 = 0.07;
    const GOAL_POSITION: f64 = 0.5;
    const GRAVITY: f64 = 0.0025;

    pub(super) fn step(s: &[f64], action: f64, power: f64) -> (Vec<f64>, bool) {
        let (x, v) = (s[0], s[1]);
        let mut v = (v + action * power - GRAVITY * (3.0 * x).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let x = (x + v).clamp(MIN_POSITION, MAX_POSITION);
        // Inelastic left wall.
        if x == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (vec![x, v], x >= GOAL_POSITION)
    }
}

/// Two-link underactuated pendulum ("book" dynamics), one RK4 step per
/// environment step, torque applied at the second joint.
mod acrobot {
    use super::PI;

    const DT: f64 = 0.2;
    const LINK_LENGTH_1: f64 = 1.0;
    const LINK_MASS_1: f64 = 1.0;
    const LINK_MASS_2: f64 = 1.0;
    const LINK_COM_POS_1: f64 = 0.5;
    const LINK_COM_POS_2: f64 = 0.5;
    const LINK_MOI: f64 = 1.0;
    const MAX_VEL_1: f64 = 4.0 * PI;
    const MAX_VEL_2: f64 = 9.0 * PI;
    const G: f64 = 9.8;

    fn derivs(s: [f64; 4], torque: f64) -> [f64; 4] {
        let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
        let (l1, lc1, lc2) = (LINK_LENGTH_1, LINK_COM_POS_1, LINK_COM_POS_2);
        let (i1, i2) = (LINK_MOI, LINK_MOI);
        let [theta1, theta2, dtheta1, dtheta2] = s;

        let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
        let phi2 = m2 * lc2 * G * (theta1 + theta2 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
            - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
            + (m1 * lc1 + m2 * l1) * G * (theta1 - PI / 2.0).cos()
            + phi2;
        let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
            / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
        let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
        [dtheta1, dtheta2, ddtheta1, ddtheta2]
    }

    fn rk4(s: [f64; 4], torque: f64) -> [f64; 4] {
        let add = |a: [f64; 4], k: [f64; 4], h: f64| std::array::from_fn(|i| a[i] + h * k[i]);
        let k1 = derivs(s, torque);
        let k2 = derivs(add(s, k1, DT / 2.0), torque);
        let k3 = derivs(add(s, k2, DT / 2.0), torque);
        let k4 = derivs(add(s, k3, DT), torque);
        std::array::from_fn(|i| s[i] + DT / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    fn wrap(mut x: f64) -> f64 {
        while x > PI {
            x -= 2.0 * PI;
        }
        while x < -PI {
            x += 2.0 * PI;
        }
        x
    }

    pub(super) fn tip_height(theta1: f64, theta2: f64) -> f64 {
        -theta1.cos() - (theta1 + theta2).cos()
    }

    pub(super) fn step(s: &[f64], torque: f64, y_goal: f64) -> (Vec<f64>, bool) {
        let n = rk4([s[0], s[1], s[2], s[3]], torque);
        let next = vec![
            wrap(n[0]),
            wrap(n[1]),
            n[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            n[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ];
        let goal = tip_height(next[0], next[1]) >= y_goal;
        (next, goal)
    }
}

/// Tip height of the Acrobot, `-cos(theta1) - cos(theta1 + theta2)`.
pub fn acrobot_tip_height(theta1: f64, theta2: f64) -> f64 {
    acrobot::tip_height(theta1, theta2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Undiscounted return.
    pub total_return: f64,
    pub reached_goal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn observations(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.transitions.iter().map(|t| t.observation.as_slice())
    }
}

/// Anything that maps observations to actions.
pub trait Policy {
    fn act(&mut self, observation: &[f64], action: &mut [f64]) -> Result<()>;
}

/// Borrowing adapter that evaluates a network with reusable buffers.
pub struct NetworkPolicy<'a> {
    params: &'a ParameterVector,
    scratch: Scratch,
}

impl<'a> NetworkPolicy<'a> {
    pub fn new(params: &'a ParameterVector) -> Self {
        NetworkPolicy {
            params,
            scratch: Scratch::new(params.shape()),
        }
    }
}

impl Policy for NetworkPolicy<'_> {
    fn act(&mut self, observation: &[f64], action: &mut [f64]) -> Result<()> {
        self.params.forward_into(observation, &mut self.scratch, action)
    }
}

/// Source of policy rollouts with environment-call accounting. [`Env`] is
/// the real implementation; searches are generic over it so tests can plug
/// in cheap stand-ins.
pub trait RolloutEnv {
    fn rollout(&mut self, params: &ParameterVector) -> Result<Trajectory>;
    /// Environment calls consumed so far.
    fn calls(&self) -> u64;
    fn limit(&self) -> Option<u64>;
}

impl RolloutEnv for Env {
    fn rollout(&mut self, params: &ParameterVector) -> Result<Trajectory> {
        Env::rollout(self, params)
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn limit(&self) -> Option<u64> {
        self.limit
    }
}

/// A task instance that counts environment calls against an optional budget.
#[derive(Clone, Debug)]
pub struct Env {
    spec: EnvSpec,
    calls: u64,
    limit: Option<u64>,
}

impl Env {
    pub fn new(spec: EnvSpec) -> Self {
        Env {
            spec,
            calls: 0,
            limit: None,
        }
    }

    pub fn with_budget(spec: EnvSpec, limit: u64) -> Self {
        Env {
            spec,
            calls: 0,
            limit: Some(limit),
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Environment steps taken so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn limit(&self) -> Option<u64> {
        self.limit
    }

    pub fn remaining(&self) -> Option<u64> {
        self.limit.map(|l| l - self.calls)
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == Some(0)
    }

    /// Runs the network's policy for one episode.
    pub fn rollout(&mut self, params: &ParameterVector) -> Result<Trajectory> {
        let shape = params.shape();
        check_dim("network input", self.spec.observation_dim(), shape.input_dim)?;
        check_dim("network output", self.spec.action_dim(), shape.output_dim)?;
        self.rollout_policy(&mut NetworkPolicy::new(params))
    }

    pub fn rollout_policy(&mut self, policy: &mut dyn Policy) -> Result<Trajectory> {
        let mut state = reset(&self.spec);
        let mut observation = state.observation(&self.spec);
        let mut transitions = Vec::with_capacity(self.spec.horizon);
        let mut total_return = 0.0;
        let mut reached_goal = false;
        while !state.done {
            if let Some(limit) = self.limit {
                if self.calls >= limit {
                    return Err(Error::BudgetExhausted { limit });
                }
            }
            let mut action = vec![0.0; self.spec.action_dim()];
            policy.act(&observation, &mut action)?;
            let outcome = step(&self.spec, &state, &action)?;
            self.calls += 1;
            let next_observation = outcome.state.observation(&self.spec);
            total_return += outcome.reward;
            reached_goal |= outcome.reached_goal;
            transitions.push(Transition {
                observation: std::mem::replace(&mut observation, next_observation.clone()),
                action,
                reward: outcome.reward,
                next_observation,
            });
            state = outcome.state;
        }
        Ok(Trajectory {
            transitions,
            total_return,
            reached_goal,
        })
    }
}
