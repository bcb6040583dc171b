//! Continual-learning experiment driver.
//!
//! For every method and seed the task sequence is walked in order. All
//! methods draw rollout randomness for task `i` from the same stream
//! `(seed, ROLLOUT, i)` and fresh initializations from `(seed, INIT, i)`,
//! so at `i = 0` the three methods behave identically.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use uabs_core::comps::{self, CompsError, MetaState};
use uabs_core::env::{self, Simulator, TaskConfig};
use uabs_core::policy::{init_params, PolicyParams};
use uabs_core::reinforce::{self, TrainError};
use uabs_core::seed::{self, tag};

use crate::config::{ConfigError, Method, RunConfig};
use crate::manifest::{self, ManifestError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("task {index}: {message}")]
    Task { index: usize, message: String },
    #[error("training failed: {0}")]
    Train(String),
    #[error("need {needed} task manifests in {dir}, found {found}")]
    InsufficientTasks { dir: PathBuf, needed: usize, found: usize },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<TrainError> for HarnessError {
    fn from(e: TrainError) -> Self {
        HarnessError::Train(e.to_string())
    }
}

impl From<CompsError> for HarnessError {
    fn from(e: CompsError) -> Self {
        HarnessError::Train(e.to_string())
    }
}

/// One point of a learning curve: a method's mean packets per episode on task `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: Method,
    pub seed: u64,
    pub task_index: usize,
    /// Mean undiscounted packet total over the task's N episodes.
    pub mean_packets: f64,
    /// Population standard deviation of the same totals.
    pub std_packets: f64,
}

/// Simulator calls observed on archived tasks while CoMPS ran its meta-update
/// after task `task_index`. Must always be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaAudit {
    pub seed: u64,
    pub task_index: usize,
    pub env_calls_during_meta: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub rows: Vec<MetricsRow>,
    pub audit: Vec<MetaAudit>,
    /// Final meta-learned initialization per seed (CoMPS only).
    pub meta_theta: Vec<(u64, PolicyParams)>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn row(method: Method, seed: u64, task_index: usize, rewards: &[u64]) -> MetricsRow {
    let values: Vec<f64> = rewards.iter().map(|&r| r as f64).collect();
    let (mean_packets, std_packets) = mean_std(&values);
    MetricsRow { method, seed, task_index, mean_packets, std_packets }
}

struct MethodRun {
    rows: Vec<MetricsRow>,
    audit: Vec<MetaAudit>,
    meta_theta: Option<PolicyParams>,
}

fn run_method(cfg: &RunConfig, tasks: &[TaskConfig], method: Method, seed: u64) -> Result<MethodRun, HarnessError> {
    let chan = cfg.channel()?;
    let rew = cfg.reward();
    let rl = cfg.rl();
    let meta = cfg.meta()?;
    let enc = cfg.encoder();
    let arch = cfg.arch();
    let fresh = |i: usize| init_params(&arch, &mut seed::stream(seed, &[tag::INIT, i as u64]));

    let mut sims: Vec<Simulator> = Vec::with_capacity(tasks.len());
    let mut rows = Vec::with_capacity(tasks.len());
    let mut audit = Vec::new();
    let mut carried: Option<PolicyParams> = None;
    let mut meta_state = MetaState::new(fresh(0));

    for (i, task) in tasks.iter().enumerate() {
        let sim = Simulator::new(task.clone(), chan.clone(), rew)
            .map_err(|e| HarnessError::Task { index: i, message: e.to_string() })?;
        sims.push(sim);
        let mut rollout = seed::stream(seed, &[tag::ROLLOUT, i as u64]);
        let sim = &mut sims[i];
        let rewards = match method {
            Method::Conventional => {
                reinforce::train_task(&fresh(i), sim, &rl, &enc, &mut rollout)?.per_episode_rewards
            }
            Method::Transfer => {
                let start = carried.take().unwrap_or_else(|| fresh(0));
                let out = reinforce::train_task(&start, sim, &rl, &enc, &mut rollout)?;
                carried = Some(out.theta_star);
                out.per_episode_rewards
            }
            Method::Comps => {
                let rewards = comps::train_and_archive(&mut meta_state, sim, &rl, &enc, &mut rollout)?;
                let before: u64 = sims.iter().map(Simulator::calls).sum();
                let mut meta_rng = seed::stream(seed, &[tag::META, i as u64]);
                meta_state = comps::meta_update(&meta_state, &meta, &mut meta_rng)?;
                let after: u64 = sims.iter().map(Simulator::calls).sum();
                audit.push(MetaAudit { seed, task_index: i, env_calls_during_meta: after - before });
                rewards
            }
        };
        rows.push(row(method, seed, i, &rewards));
    }
    let meta_theta = (method == Method::Comps).then_some(meta_state.theta0);
    Ok(MethodRun { rows, audit, meta_theta })
}

/// Runs every configured method and seed over `tasks` (length K). Rows come
/// back ordered by method (conventional, transfer, comps), then seed order of
/// the config, then task index.
pub fn run_continual(cfg: &RunConfig, tasks: &[TaskConfig]) -> Result<RunReport, HarnessError> {
    if tasks.len() != cfg.k {
        return Err(HarnessError::Config(ConfigError::Invalid(format!(
            "expected K = {} tasks, got {}",
            cfg.k,
            tasks.len()
        ))));
    }
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results: Vec<Result<MethodRun, HarnessError>> = jobs
        .par_iter()
        .map(|&(m, s)| run_method(cfg, tasks, m, s))
        .collect();

    let mut report = RunReport::default();
    for ((_, s), res) in jobs.iter().zip(results) {
        let run = res?;
        report.rows.extend(run.rows);
        report.audit.extend(run.audit);
        if let Some(theta) = run.meta_theta {
            report.meta_theta.push((*s, theta));
        }
    }
    Ok(report)
}

/// Alternating clockwise / counterclockwise toy tasks, clockwise at even `i`.
pub fn toy_tasks(cfg: &RunConfig) -> Vec<TaskConfig> {
    let (cw, ccw) = env::make_toy_tasks();
    let adjust = |mut t: TaskConfig| {
        t.area.altitude = cfg.altitude_m;
        t.uabs_speed = cfg.v_u;
        t.traffic.p_msg = cfg.p_msg;
        t.horizon = cfg.horizon;
        if let env::GueMotion::Waypoints(gues) = &mut t.traffic.motion {
            for g in gues.iter_mut() {
                g.speed = cfg.v_g;
            }
        }
        t
    };
    let (cw, ccw) = (adjust(cw), adjust(ccw));
    (0..cfg.k).map(|i| if i % 2 == 0 { cw.clone() } else { ccw.clone() }).collect()
}

pub fn run_toy(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    run_continual(cfg, &toy_tasks(cfg))
}

/// Where urban tasks come from.
#[derive(Debug, Clone)]
pub enum TaskSource {
    /// Directory of task manifests, read in file-name order.
    Traces(PathBuf),
    /// Synthetic tasks drawn from this seed.
    Generator(u64),
}

/// `k` synthetic tasks; task `i` is drawn from stream `(gen_seed, TASKGEN, i)`.
pub fn generate_tasks(cfg: &RunConfig, gen_seed: u64, k: usize) -> Vec<TaskConfig> {
    let spec = cfg.random_task_spec();
    (0..k)
        .map(|i| env::gen_random_task(&spec, &mut seed::stream(gen_seed, &[tag::TASKGEN, i as u64])))
        .collect()
}

/// The first `k` manifests (`*.toml`) of `dir` in file-name order.
pub fn load_tasks(dir: &Path, k: usize) -> Result<Vec<TaskConfig>, HarnessError> {
    let io = |source| HarnessError::Io { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.len() < k {
        return Err(HarnessError::InsufficientTasks { dir: dir.to_path_buf(), needed: k, found: paths.len() });
    }
    paths.truncate(k);
    paths
        .iter()
        .map(|p| manifest::load_task(p).map_err(HarnessError::from))
        .collect()
}

pub fn urban_tasks(cfg: &RunConfig, source: &TaskSource) -> Result<Vec<TaskConfig>, HarnessError> {
    match source {
        TaskSource::Generator(s) => Ok(generate_tasks(cfg, *s, cfg.k)),
        TaskSource::Traces(dir) => load_tasks(dir, cfg.k),
    }
}

pub fn run_urban(cfg: &RunConfig, source: &TaskSource) -> Result<RunReport, HarnessError> {
    run_continual(cfg, &urban_tasks(cfg, source)?)
}

/// Across-seed aggregate for one method and task index.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub task_index: usize,
    pub seeds: usize,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
}

/// Mean and population std of `mean_packets` over seeds, per method and task.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = rows.iter().map(|r| (r.method, r.task_index)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, task_index)| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.task_index == task_index)
                .map(|r| r.mean_packets)
                .collect();
            let (mean, std) = mean_std(&values);
            SummaryRow { method, task_index, seeds: values.len(), mean, std }
        })
        .collect()
}
