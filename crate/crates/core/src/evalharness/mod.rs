//! Episode-level evaluation: one fresh expert demonstration per episode as
//! the specification, a differently seeded world for execution, and
//! aggregated, reproducible reports.

mod report;

pub use report::*;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::expert::{demonstrate, next_move, pick_and_place_calls};
use crate::interpreter::{run, run_traced, ExecStep, ModelController, RunResult, RuntimeConfig, Termination};
use crate::ntpmodel::NtpModel;
use crate::taskgen::{success, TaskInstance};
use crate::worldsim::Environment;

/// What executes an episode.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    Model(&'a NtpModel),
    /// Closed-loop scripted expert; the upper-bound control row.
    Expert,
}

impl Policy<'_> {
    pub fn name(&self) -> String {
        match self {
            Policy::Model(m) => m.variant().name().to_string(),
            Policy::Expert => "expert".to_string(),
        }
    }
}

/// Evaluation protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Topple probability after each release; 0 disables the adversary.
    pub adversary_prob: f64,
    pub runtime: RuntimeConfig,
    /// Worker threads; `None` reads `NTP_WORKERS` (default 1).
    pub workers: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: 100, seed: 0, adversary_prob: 0.0, runtime: RuntimeConfig::default(), workers: None }
    }
}

/// Outcome of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub index: usize,
    pub task: String,
    pub success: bool,
    pub termination: Termination,
    pub api_calls: usize,
    pub topples: usize,
}

/// Worker count from `NTP_WORKERS`, defaulting to 1.
pub fn workers_from_env() -> usize {
    std::env::var("NTP_WORKERS").ok().and_then(|v| v.parse().ok()).filter(|n| *n > 0).unwrap_or(1)
}

/// Independent generator for episode `index` under `master`.
pub fn episode_rng(master: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng
}

/// Closed-loop expert rollout under the runtime's API budget.
fn run_expert(task: &TaskInstance, env: &mut Environment, cfg: &RuntimeConfig) -> Result<(Termination, usize), NtpError> {
    let mut calls = 0;
    while let Some((obj, target)) = next_move(&env.state, task) {
        for c in pick_and_place_calls(obj, target) {
            if calls >= cfg.max_api_calls {
                return Ok((Termination::BudgetExceeded, calls));
            }
            env.call(c)?;
            calls += 1;
        }
    }
    Ok((Termination::Completed, calls))
}

/// Task, demonstration seed and world of episode `index`.
fn setup<'p>(pool: &'p [TaskInstance], cfg: &EvalConfig, index: usize) -> Result<(&'p TaskInstance, u64, Environment), NtpError> {
    let mut rng = episode_rng(cfg.seed, index);
    let task = &pool[rng.gen_range(0..pool.len())];
    let demo_seed: u64 = rng.gen();
    let env_seed: u64 = rng.gen();
    let adv_seed: u64 = rng.gen();
    let mut env = Environment::new(task, env_seed)?;
    if cfg.adversary_prob > 0.0 {
        env = env.with_adversary(cfg.adversary_prob, adv_seed);
    }
    Ok((task, demo_seed, env))
}

fn run_episode(policy: Policy, pool: &[TaskInstance], cfg: &EvalConfig, index: usize) -> Result<Episode, NtpError> {
    let (task, demo_seed, mut env) = setup(pool, cfg, index)?;
    let (termination, api_calls, reported) = match policy {
        Policy::Expert => {
            let (t, n) = run_expert(task, &mut env, &cfg.runtime)?;
            (t, n, None)
        }
        Policy::Model(m) => {
            let demo = demonstrate(task, demo_seed)?;
            let r = run(task, task.family().root_program(), &demo.spec, &mut env, &ModelController { model: m }, &cfg.runtime)?;
            (r.termination, r.api_log.len(), Some(r.success))
        }
    };
    let ok = success(&env.state, task);
    if reported.is_some_and(|s| s != ok) {
        return Err(NtpError::Config(format!("episode {index}: runtime and final-state success disagree")));
    }
    Ok(Episode { index, task: task.canonical_key(), success: ok, termination, api_calls, topples: env.topples })
}

/// Every decision the model makes in episode `index`, for debugging.
pub fn trace_episode(model: &NtpModel, pool: &[TaskInstance], cfg: &EvalConfig, index: usize) -> Result<(RunResult, Vec<ExecStep>), NtpError> {
    if pool.is_empty() {
        return Err(NtpError::EmptyDataset);
    }
    let (task, demo_seed, mut env) = setup(pool, cfg, index)?;
    let demo = demonstrate(task, demo_seed)?;
    run_traced(task, task.family().root_program(), &demo.spec, &mut env, &ModelController { model }, &cfg.runtime, true)
}

/// Runs `cfg.episodes` episodes on tasks drawn uniformly from `pool`.
/// Episodes are spread over worker threads; results do not depend on the
/// worker count.
pub fn run_episodes(policy: Policy, pool: &[TaskInstance], cfg: &EvalConfig) -> Result<Vec<Episode>, NtpError> {
    if pool.is_empty() {
        return Err(NtpError::EmptyDataset);
    }
    if cfg.episodes == 0 {
        return Err(NtpError::Config("at least one episode is required".into()));
    }
    let workers = cfg.workers.unwrap_or_else(workers_from_env).clamp(1, cfg.episodes);
    let mut out: Vec<Episode> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..cfg.episodes).step_by(workers).map(|i| run_episode(policy, pool, cfg, i)).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| NtpError::Config("evaluation worker panicked".into()))?)
            .collect::<Result<Vec<Vec<_>>, NtpError>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    out.sort_by_key(|e| e.index);
    Ok(out)
}

/// Evaluates `policy` on `pool` and aggregates a report.
pub fn evaluate(policy: Policy, pool: &[TaskInstance], label: &str, cfg: &EvalConfig, checkpoint_hash: Option<String>) -> Result<EvalReport, NtpError> {
    let episodes = run_episodes(policy, pool, cfg)?;
    Ok(EvalReport::aggregate(policy, pool[0].family(), label, cfg, &episodes, checkpoint_hash))
}

/// Clean and perturbed success of one policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPair {
    pub clean: EvalReport,
    pub perturbed: EvalReport,
    pub drop: f64,
}

/// Each policy evaluated with and without the adversary on the same
/// episode seeds.
pub fn adversarial_eval(policies: &[Policy], pool: &[TaskInstance], prob: f64, cfg: &EvalConfig) -> Result<Vec<AdversarialPair>, NtpError> {
    policies
        .iter()
        .map(|p| {
            let clean = evaluate(*p, pool, "clean", &EvalConfig { adversary_prob: 0.0, ..cfg.clone() }, None)?;
            let perturbed = evaluate(*p, pool, &format!("adversary_p={prob}"), &EvalConfig { adversary_prob: prob, ..cfg.clone() }, None)?;
            let drop = clean.success_rate - perturbed.success_rate;
            Ok(AdversarialPair { clean, perturbed, drop })
        })
        .collect()
}

/// Sorting tasks with `n` objects in every category under each mapping.
pub fn sorting_pool(mappings: &[[usize; 4]], n: usize) -> Result<Vec<TaskInstance>, NtpError> {
    mappings.iter().map(|m| TaskInstance::sorting(*m, [n; 4])).collect()
}

/// Every policy at every objects-per-category grid point.
pub fn length_sweep(policies: &[Policy], mappings: &[[usize; 4]], grid: &[usize], cfg: &EvalConfig) -> Result<Vec<EvalReport>, NtpError> {
    if grid.is_empty() {
        return Err(NtpError::Config("empty sweep grid".into()));
    }
    let mut out = Vec::new();
    for &n in grid {
        let pool = sorting_pool(mappings, n)?;
        for p in policies {
            let mut r = evaluate(*p, &pool, &format!("objects_per_category={n}"), cfg, None)?;
            r.grid_value = Some(n);
            out.push(r);
        }
    }
    Ok(out)
}

/// Bowl counts and fork counts of the clean-up success matrix.
pub const CLEANUP_BOWLS: [usize; 4] = [1, 2, 3, 4];
pub const CLEANUP_FORKS: [usize; 4] = [0, 5, 10, 20];

/// Clean-up success over bowls × forks; each cell draws random bowl orders.
pub fn cleanup_matrix(policy: Policy, cfg: &EvalConfig) -> Result<Vec<EvalReport>, NtpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for b in CLEANUP_BOWLS {
        for f in CLEANUP_FORKS {
            let pool = (0..8)
                .map(|_| {
                    let mut order: Vec<usize> = (0..b).collect();
                    rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
                    TaskInstance::cleanup(b, f, order)
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(evaluate(policy, &pool, &format!("bowls={b},forks={f}"), cfg, None)?);
        }
    }
    Ok(out)
}

/// Success counts keyed by task.
pub fn per_task(episodes: &[Episode]) -> BTreeMap<String, (usize, usize)> {
    let mut m: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for e in episodes {
        let c = m.entry(e.task.clone()).or_default();
        c.0 += usize::from(e.success);
        c.1 += 1;
    }
    m
}
