use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlgorithmConfig, AlgorithmKind, ExperimentConfig};
use crate::curve::{CurvePoint, RunResult};
use crate::deepga;
use crate::env::{Env, EnvKind};
use crate::error::{Error, Result};
use crate::search;

pub const CURVE_HEADER: &str = "env_calls,best_return,wall_ms";
const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub best_return: f64,
    pub reached_goal: bool,
    pub env_calls: u64,
    pub iterations: u64,
    pub first_goal_calls: Option<u64>,
    /// Zero unless wall-clock recording is enabled.
    pub wall_ms: u64,
    pub curve_path: PathBuf,
    pub genome_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub algorithm: AlgorithmKind,
    pub env: EnvKind,
    pub budget: u64,
    pub trials: Vec<TrialResult>,
    pub failed: Vec<FailedTrial>,
    /// Mean best return over completed trials.
    pub mean_best_return: Option<f64>,
    /// Standard error of that mean (sample standard deviation over sqrt(n)).
    pub stderr_best_return: Option<f64>,
    pub goal_trials: usize,
    /// Mean environment calls to the first goal, over trials that reached it.
    pub mean_calls_to_goal: Option<f64>,
}

impl ExperimentSummary {
    fn from_trials(config: &ExperimentConfig, trials: Vec<TrialResult>, failed: Vec<FailedTrial>) -> Self {
        let returns: Vec<f64> = trials.iter().map(|t| t.best_return).collect();
        let (mean, stderr) = mean_and_stderr(&returns);
        let goal_calls: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.first_goal_calls)
            .map(|c| c as f64)
            .collect();
        ExperimentSummary {
            algorithm: config.algorithm.kind(),
            env: config.env.kind(),
            budget: config.budget,
            goal_trials: trials.iter().filter(|t| t.reached_goal).count(),
            mean_calls_to_goal: mean_and_stderr(&goal_calls).0,
            trials,
            failed,
            mean_best_return: mean,
            stderr_best_return: stderr,
        }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            what: format!("summary {}", path.display()),
            source,
        })
    }
}

fn mean_and_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Runs one trial of the configured algorithm in memory.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let env = Env::with_budget(config.env.clone(), config.budget);
    let shape = config.shape();
    match &config.algorithm {
        AlgorithmConfig::Mctspo(c) => search::run(env, shape, c.clone(), seed),
        AlgorithmConfig::Deepga(c) => deepga::run_ga(env, shape, c, seed),
    }
}

/// Runs every seed of `config` (in parallel), writes a curve CSV and a best
/// genome per trial plus `summary.json`, and returns the summary. A trial
/// that errors or panics is recorded as failed; the others still complete.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let dir = &config.output_dir;
    ensure_writable(dir)?;
    write_file(&dir.join("config.json"), &config.to_json())?;

    let outcomes: Vec<(u64, Result<TrialResult>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let outcome = panic::catch_unwind(AssertUnwindSafe(|| execute_trial(config, seed)))
                .unwrap_or_else(|payload| Err(Error::Contract(format!("trial panicked: {}", panic_message(&payload)))));
            (seed, outcome)
        })
        .collect();

    let mut trials = Vec::new();
    let mut failed = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => {
                log::error!("trial {seed} failed: {e}");
                failed.push(FailedTrial {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = ExperimentSummary::from_trials(config, trials, failed);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join(SUMMARY_FILE), &json)?;
    Ok(summary)
}

fn execute_trial(config: &ExperimentConfig, seed: u64) -> Result<TrialResult> {
    let started = Instant::now();
    let mut result = run_trial(config, seed)?;
    let wall_ms = if config.record_wall_clock {
        started.elapsed().as_millis() as u64
    } else {
        for p in &mut result.curve {
            p.wall_ms = 0;
        }
        0
    };
    let stem = format!("{}-seed{seed}", config.algorithm.kind());
    let curve_path = config.output_dir.join(format!("{stem}-curve.csv"));
    let genome_path = config.output_dir.join(format!("{stem}-genome.json"));
    write_curve_csv(&curve_path, &result.curve)?;
    result.best_genome.save(&genome_path)?;
    log::info!(
        "trial {seed}: best {:.6} after {} env calls ({} iterations)",
        result.best_return,
        result.env_calls,
        result.iterations
    );
    Ok(TrialResult {
        seed,
        best_return: result.best_return,
        reached_goal: result.best_reached_goal,
        env_calls: result.env_calls,
        iterations: result.iterations,
        first_goal_calls: result.first_goal_calls,
        wall_ms,
        curve_path,
        genome_path,
    })
}

fn panic_message(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-check");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes a curve with full-precision (round-trip) floats.
pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut out = String::with_capacity(32 * (curve.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for p in curve {
        writeln!(out, "{},{:?},{}", p.env_calls, p.best_return, p.wall_ms).unwrap();
    }
    write_file(path, &out)
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::Config(format!("{}: missing curve header", path.display())));
    }
    let bad = |line: &str| Error::Config(format!("{}: malformed curve row `{line}`", path.display()));
    lines
        .map(|line| {
            let mut cols = line.split(',');
            let (Some(c), Some(r), Some(w), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err(bad(line));
            };
            Ok(CurvePoint {
                env_calls: c.parse().map_err(|_| bad(line))?,
                best_return: r.parse().map_err(|_| bad(line))?,
                wall_ms: w.parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}
