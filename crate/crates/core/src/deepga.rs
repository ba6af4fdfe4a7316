//! Deep GA baseline: truncation selection, elitism, and safe-mutation
//! offspring, on the same seed-chain genomes as the tree search.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveRecorder, RunResult};
use crate::env::{RolloutEnv, Trajectory};
use crate::error::{Error, Result};
use crate::genome::{self, Genome, MutationAction};
use crate::policy_net::{NetworkShape, ParameterVector};
use crate::rng;
use crate::safe_mutation::{get_candidate_actions, DivergenceBudget};

/// Parents tried for one child before giving up on degenerate directions.
const PARENT_RETRIES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    #[serde(default = "default_population")]
    pub population_size: usize,
    #[serde(default = "default_truncation")]
    pub truncation_size: usize,
    #[serde(default = "default_elites")]
    pub elite_count: usize,
    /// Generation cap; `None` runs until the environment-call budget is spent.
    #[serde(default)]
    pub generations: Option<u64>,
    #[serde(default)]
    pub divergence: DivergenceBudget,
}

fn default_population() -> usize {
    100
}

fn default_truncation() -> usize {
    20
}

fn default_elites() -> usize {
    3
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: default_population(),
            truncation_size: default_truncation(),
            elite_count: default_elites(),
            generations: None,
            divergence: DivergenceBudget::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.truncation_size == 0 {
            return Err(Error::Config("population and truncation sizes must be positive".into()));
        }
        if !(self.elite_count <= self.truncation_size && self.truncation_size <= self.population_size) {
            return Err(Error::Config(
                "need elite_count <= truncation_size <= population_size".into(),
            ));
        }
        if self.generations == Some(0) {
            return Err(Error::Config("generations must be positive".into()));
        }
        self.divergence.validate()
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub fitness: f64,
    pub reached_goal: bool,
    pub trajectory: Arc<Trajectory>,
}

#[derive(Clone, Debug)]
pub struct Individual {
    pub genome: Genome,
    pub params: ParameterVector,
    /// Cached after the first rollout; elites carry theirs forward.
    pub evaluation: Option<Evaluation>,
}

impl Individual {
    pub fn from_genome(genome: Genome) -> Result<Self> {
        let params = genome.materialize()?;
        Ok(Individual {
            genome,
            params,
            evaluation: None,
        })
    }

    pub fn fitness(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.fitness)
    }
}

/// Ranks by fitness, copies the elites, and fills the rest of the next
/// generation with one-step safe mutations of uniformly chosen parents from
/// the truncation set.
pub fn evolve_generation<R: Rng + ?Sized>(
    population: &[Individual],
    config: &GaConfig,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    if population.is_empty() {
        return Err(Error::contract("cannot evolve an empty population"));
    }
    let mut ranked: Vec<(usize, f64)> = population
        .iter()
        .enumerate()
        .map(|(i, ind)| {
            ind.fitness()
                .map(|f| (i, f))
                .ok_or_else(|| Error::contract("population contains unevaluated individuals"))
        })
        .collect::<Result<_>>()?;
    // Stable sort keeps the lower index first among equal fitness.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));

    let truncation = config.truncation_size.min(ranked.len());
    let elites = config.elite_count.min(truncation);
    let mut next: Vec<Individual> = ranked[..elites].iter().map(|&(i, _)| population[i].clone()).collect();

    while next.len() < config.population_size {
        let mut child = None;
        for _ in 0..PARENT_RETRIES {
            let parent = &population[ranked[rng.random_range(0..truncation)].0];
            let traj = &parent
                .evaluation
                .as_ref()
                .expect("ranked individuals are evaluated")
                .trajectory;
            match get_candidate_actions(&parent.params, traj, 1, &config.divergence, rng) {
                Ok(actions) => {
                    child = Some(offspring(parent, actions[0])?);
                    break;
                }
                Err(Error::CandidateGenerationFailed { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        next.push(child.ok_or(Error::CandidateGenerationFailed {
            attempts: PARENT_RETRIES,
        })?);
    }
    Ok(next)
}

fn offspring(parent: &Individual, action: MutationAction) -> Result<Individual> {
    Ok(Individual {
        genome: parent.genome.child(action)?,
        params: genome::apply_mutation(&parent.params, &action)?,
        evaluation: None,
    })
}

/// Runs generations of evaluate-then-evolve until the generation cap or the
/// environment budget is reached.
pub fn run_ga<E: RolloutEnv>(
    mut env: E,
    shape: Arc<NetworkShape>,
    config: &GaConfig,
    master_seed: u64,
) -> Result<RunResult> {
    config.validate()?;
    shape.validate()?;
    if config.generations.is_none() && env.limit().is_none() {
        return Err(Error::Config(
            "a GA run needs a generation cap or an environment budget".into(),
        ));
    }
    let mut rng: ChaCha8Rng = rng::master(master_seed);
    let mut curve = CurveRecorder::new(env.limit());
    let mut best: Option<(Genome, f64, bool)> = None;
    let mut first_goal_calls = None;

    let mut population = (0..config.population_size)
        .map(|_| Individual::from_genome(Genome::from_seed(Arc::clone(&shape), rng.random())))
        .collect::<Result<Vec<_>>>()?;

    let mut generations = 0;
    'outer: loop {
        for ind in population.iter_mut().filter(|i| i.evaluation.is_none()) {
            let traj = match env.rollout(&ind.params) {
                Ok(t) => t,
                Err(Error::BudgetExhausted { .. }) => break 'outer,
                Err(e) => return Err(e),
            };
            if traj.reached_goal && first_goal_calls.is_none() {
                first_goal_calls = Some(env.calls());
            }
            if best.as_ref().map_or(true, |b| traj.total_return > b.1) {
                best = Some((ind.genome.clone(), traj.total_return, traj.reached_goal));
            }
            curve.observe(env.calls(), best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
            ind.evaluation = Some(Evaluation {
                fitness: traj.total_return,
                reached_goal: traj.reached_goal,
                trajectory: Arc::new(traj),
            });
        }
        generations += 1;
        if config.generations.is_some_and(|cap| generations >= cap) {
            break;
        }
        population = evolve_generation(&population, config, &mut rng)?;
    }

    let (best_genome, best_return, best_reached_goal) =
        best.unwrap_or_else(|| (Genome::root(Arc::clone(&shape)), f64::NEG_INFINITY, false));
    Ok(RunResult {
        best_genome,
        best_return,
        best_reached_goal,
        curve: curve.finish(),
        env_calls: env.calls(),
        iterations: generations,
        first_goal_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Env, EnvSpec};
    use rand::SeedableRng;

    fn shape() -> Arc<NetworkShape> {
        Arc::new(NetworkShape::mlp(2, &[8], vec![1.0]))
    }

    fn evaluated_population(n: usize) -> Vec<Individual> {
        let mut env = Env::new(EnvSpec::sparse_mountain_car());
        (0..n as u64)
            .map(|seed| {
                let mut ind = Individual::from_genome(Genome::from_seed(shape(), seed)).unwrap();
                let traj = env.rollout(&ind.params).unwrap();
                ind.evaluation = Some(Evaluation {
                    fitness: traj.total_return,
                    reached_goal: traj.reached_goal,
                    trajectory: Arc::new(traj),
                });
                ind
            })
            .collect()
    }

    #[test]
    fn selection_elitism_and_offspring_structure() {
        let pop = evaluated_population(10);
        let config = GaConfig {
            population_size: 10,
            truncation_size: 3,
            elite_count: 1,
            ..Default::default()
        };
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| pop[b].fitness().unwrap().total_cmp(&pop[a].fitness().unwrap()));
        let top: Vec<&Genome> = order[..3].iter().map(|&i| &pop[i].genome).collect();

        let next = evolve_generation(&pop, &config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(next.len(), 10);
        assert_eq!(&next[0].genome, top[0]);
        assert!(next[0].evaluation.is_some());
        for child in &next[1..] {
            assert!(child.evaluation.is_none());
            let actions = child.genome.actions();
            let parent = Genome::new(shape(), actions[..actions.len() - 1].to_vec()).unwrap();
            assert!(top.contains(&&parent), "child descends from outside the truncation set");
            assert_eq!(child.params, child.genome.materialize().unwrap());
        }
    }

    #[test]
    fn unevaluated_population_is_rejected() {
        let pop = vec![Individual::from_genome(Genome::from_seed(shape(), 1)).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(evolve_generation(&pop, &GaConfig::default(), &mut rng).is_err());
        assert!(evolve_generation(&[], &GaConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn config_invariants() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig {
            elite_count: 30,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_generation_returns_best_initialization() {
        let config = GaConfig {
            population_size: 12,
            truncation_size: 4,
            elite_count: 2,
            generations: Some(1),
            ..Default::default()
        };
        let res = run_ga(Env::new(EnvSpec::sparse_mountain_car()), shape(), &config, 5).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.best_genome.depth(), 1);

        let mut rng = rng::master(5);
        let mut env = Env::new(EnvSpec::sparse_mountain_car());
        let best = (0..12)
            .map(|_| {
                let g = Genome::from_seed(shape(), rng.random());
                env.rollout(&g.materialize().unwrap()).unwrap().total_return
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.best_return, best);
    }

    #[test]
    fn budget_stops_mid_generation() {
        let config = GaConfig {
            population_size: 20,
            truncation_size: 5,
            elite_count: 1,
            ..Default::default()
        };
        let res = run_ga(
            Env::with_budget(EnvSpec::sparse_mountain_car(), 5_000),
            shape(),
            &config,
            9,
        )
        .unwrap();
        assert!(res.env_calls <= 5_000);
        assert!(res
            .curve
            .windows(2)
            .all(|w| w[0].env_calls < w[1].env_calls && w[0].best_return <= w[1].best_return));
    }
}
