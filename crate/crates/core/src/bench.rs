//! Benchmark sweeps over generated instances.
//!
//! For every instance the schedule is solved lexicographically, one
//! unsatisfied preference per type is drawn from the instance's target
//! stream, and each target is explained and enumerated. Failures are kept
//! in the record's status and never stop the sweep.

use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::{distance, enumerate_explanations, explain, ExplainError, Explanation, ExpresProblem};
use crate::generator::{generate, target_rng, uniform, GenConfig, GenError};
use crate::model::{PrefId, PrefType, PresInstance, Schedule};
use crate::scheduler::solve_lexicographic;

pub const CSV_HEADER: [&str; 11] = [
    "instance_id",
    "seed",
    "n_agents",
    "target_type",
    "status",
    "t_first_ms",
    "n_explanations",
    "dist_mean",
    "dist_std",
    "dist_min",
    "dist_max",
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub agent_counts: Vec<usize>,
    /// Instances per agent count, with seeds `first_seed..first_seed + instances`.
    pub instances: u64,
    pub first_seed: u64,
    /// Per-target budget shared by explaining and enumerating.
    pub budget_ms: u64,
    pub schedule_budget_ms: u64,
    pub max_explanations: usize,
    /// Worker threads; 1 keeps timings free of contention.
    pub threads: usize,
    /// Template for every instance; `n_agents` and `seed` are overwritten.
    pub generator: GenConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            agent_counts: vec![10, 30, 50],
            instances: 100,
            first_seed: 0,
            budget_ms: 30_000,
            schedule_budget_ms: 300_000,
            max_explanations: 1000,
            threads: 1,
            generator: GenConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let config: BenchConfig = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), BenchError> {
        if self.agent_counts.is_empty() || self.agent_counts.contains(&0) {
            return Err(BenchError::Config("agent_counts must be non-empty and positive".into()));
        }
        if self.budget_ms == 0 || self.schedule_budget_ms == 0 || self.max_explanations == 0 {
            return Err(BenchError::Config("budgets and the explanation cap must be positive".into()));
        }
        for &n in &self.agent_counts {
            GenConfig { n_agents: n, ..self.generator.clone() }.check()?;
        }
        Ok(())
    }

    fn jobs(&self) -> Vec<GenConfig> {
        self.agent_counts
            .iter()
            .flat_map(|&n| {
                (self.first_seed..self.first_seed + self.instances).map(move |seed| GenConfig {
                    n_agents: n,
                    seed,
                    ..self.generator.clone()
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    /// Enumeration ran to exhaustion or to the cap.
    Ok,
    /// The budget ran out during enumeration; the list is partial.
    Timeout,
    NoExplanation,
    /// Not even the first explanation was found in time.
    FirstTimeout,
    /// The schedule could not be produced; no targets were drawn.
    ScheduleFailed,
    Error,
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskStatus::Ok => "Ok",
            TaskStatus::Timeout => "Timeout",
            TaskStatus::NoExplanation => "NoExplanation",
            TaskStatus::FirstTimeout => "FirstTimeout",
            TaskStatus::ScheduleFailed => "ScheduleFailed",
            TaskStatus::Error => "Error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance_id: String,
    pub seed: u64,
    pub n_agents: usize,
    pub target_type: Option<PrefType>,
    pub target: Option<PrefId>,
    pub status: TaskStatus,
    pub t_first_ms: Option<f64>,
    pub n_explanations: usize,
    pub distances: Option<DistanceStats>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    instance_id: &'a str,
    seed: u64,
    n_agents: usize,
    target_type: &'static str,
    status: String,
    t_first_ms: Option<String>,
    n_explanations: usize,
    dist_mean: Option<String>,
    dist_std: Option<String>,
    dist_min: Option<usize>,
    dist_max: Option<usize>,
}

impl BenchRecord {
    fn csv_row(&self) -> CsvRow<'_> {
        CsvRow {
            instance_id: &self.instance_id,
            seed: self.seed,
            n_agents: self.n_agents,
            target_type: self.target_type.map_or("", PrefType::as_str),
            status: self.status.to_string(),
            t_first_ms: self.t_first_ms.map(|t| format!("{t:.3}")),
            n_explanations: self.n_explanations,
            dist_mean: self.distances.map(|d| format!("{:.6}", d.mean)),
            dist_std: self.distances.map(|d| format!("{:.6}", d.std)),
            dist_min: self.distances.map(|d| d.min),
            dist_max: self.distances.map(|d| d.max),
        }
    }
}

/// Writes `records` as CSV with the fixed header.
pub fn write_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Statistics over all unordered pairs; `None` for fewer than two explanations.
pub fn distance_stats(explanations: &[Explanation]) -> Option<DistanceStats> {
    if explanations.len() < 2 {
        return None;
    }
    let (mut sum, mut sum_sq, mut pairs) = (0f64, 0f64, 0f64);
    let (mut min, mut max) = (usize::MAX, 0);
    for (i, a) in explanations.iter().enumerate() {
        for b in &explanations[i + 1..] {
            let d = distance(a, b).ok()?;
            sum += d as f64;
            sum_sq += (d * d) as f64;
            pairs += 1.0;
            min = min.min(d);
            max = max.max(d);
        }
    }
    let mean = sum / pairs;
    let std = (sum_sq / pairs - mean * mean).max(0.0).sqrt();
    Some(DistanceStats { mean, std, min, max })
}

/// Picks one unsatisfied preference per type of the instance's order.
pub fn select_targets(instance: &PresInstance, schedule: &Schedule, seed: u64) -> Vec<(PrefType, PrefId)> {
    let mut rng = target_rng(seed);
    let mut out = Vec::new();
    for &t in instance.order.types() {
        let pool: Vec<&PrefId> = instance
            .preferences
            .iter()
            .filter(|p| p.pref_type() == t && !crate::model::is_satisfied(p, schedule))
            .map(|p| &p.id)
            .collect();
        if !pool.is_empty() {
            out.push((t, pool[uniform(&mut rng, 0, pool.len() - 1)].clone()));
        }
    }
    out
}

/// Outcome of one target, with the explanations behind its statistics.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub status: TaskStatus,
    pub t_first_ms: Option<f64>,
    pub explanations: Vec<Explanation>,
}

pub fn run_task(problem: &ExpresProblem, budget: Duration, max_explanations: usize) -> TaskOutcome {
    let start = Instant::now();
    let first = explain(problem, budget);
    let t_first_ms = start.elapsed().as_secs_f64() * 1e3;
    let fail = |status| TaskOutcome { status, t_first_ms: None, explanations: Vec::new() };
    match first {
        Ok(_) => {}
        Err(ExplainError::NoExplanation { .. }) => return fail(TaskStatus::NoExplanation),
        Err(ExplainError::Timeout) => return fail(TaskStatus::FirstTimeout),
        Err(_) => return fail(TaskStatus::Error),
    }
    match enumerate_explanations(problem, max_explanations, budget) {
        Ok(list) => TaskOutcome {
            status: if list.timed_out() { TaskStatus::Timeout } else { TaskStatus::Ok },
            t_first_ms: Some(t_first_ms),
            explanations: list.explanations,
        },
        Err(ExplainError::Timeout) => {
            TaskOutcome { status: TaskStatus::Timeout, t_first_ms: Some(t_first_ms), explanations: Vec::new() }
        }
        Err(_) => TaskOutcome { status: TaskStatus::Error, t_first_ms: Some(t_first_ms), explanations: Vec::new() },
    }
}

/// All records of one instance, in target-type order.
pub fn run_instance(config: &BenchConfig, gen: &GenConfig) -> Vec<BenchRecord> {
    let instance_id = format!("a{}_s{}", gen.n_agents, gen.seed);
    let record = |target_type, target, status, outcome: Option<&TaskOutcome>| BenchRecord {
        instance_id: instance_id.clone(),
        seed: gen.seed,
        n_agents: gen.n_agents,
        target_type,
        target,
        status,
        t_first_ms: outcome.and_then(|o| o.t_first_ms),
        n_explanations: outcome.map_or(0, |o| o.explanations.len()),
        distances: outcome.and_then(|o| distance_stats(&o.explanations)),
    };
    let instance = match generate(gen) {
        Ok(i) => i,
        Err(_) => return vec![record(None, None, TaskStatus::Error, None)],
    };
    let schedule = match solve_lexicographic(&instance, Duration::from_millis(config.schedule_budget_ms)) {
        Ok(r) => r.schedule,
        Err(_) => return vec![record(None, None, TaskStatus::ScheduleFailed, None)],
    };
    let targets = select_targets(&instance, &schedule, gen.seed);
    let Some((_, first)) = targets.first() else {
        return Vec::new();
    };
    let base = match ExpresProblem::new(&instance, &schedule, first) {
        Ok(p) => p,
        Err(_) => return vec![record(None, None, TaskStatus::Error, None)],
    };
    let budget = Duration::from_millis(config.budget_ms);
    targets
        .into_iter()
        .map(|(t, id)| match base.for_target(&id) {
            Ok(problem) => {
                let outcome = run_task(&problem, budget, config.max_explanations);
                record(Some(t), Some(id), outcome.status, Some(&outcome))
            }
            Err(_) => record(Some(t), Some(id), TaskStatus::Error, None),
        })
        .collect()
}

/// Runs the whole sweep; records come back in job order regardless of threading.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    config.check()?;
    let jobs = config.jobs();
    let results: Vec<Mutex<Vec<BenchRecord>>> = jobs.iter().map(|_| Mutex::new(Vec::new())).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..config.threads.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                *results[i].lock().expect("no poisoned workers") = run_instance(config, job);
            });
        }
    });
    Ok(results.into_iter().flat_map(|m| m.into_inner().expect("no poisoned workers")).collect())
}
