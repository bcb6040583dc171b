//! Continual meta policy search (CoMPS).
//!
//! After plain REINFORCE on a new task, the task's episodes are archived
//! together with its best ("skilled") episode. The shared initialization
//! `theta0` is then meta-trained on the archive alone:
//!
//! 1. adapt `theta0` with one importance-weighted policy-gradient step on a
//!    random archived episode of a sampled task,
//! 2. score the adapted policy by behavioral cloning on that task's skilled
//!    episode,
//! 3. descend the summed cloning loss with respect to `theta0`.
//!
//! Nothing here touches a simulator: the meta-update only reads archive data.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::Rng;

use crate::env::{EncoderConfig, Simulator};
use crate::policy::{PolicyError, PolicyParams, PROB_FLOOR};
use crate::reinforce::{self, discounted_returns, Episode, RLConfig, TrainError};

/// Central-difference step of the finite-difference meta-gradient.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum CompsError {
    Policy(PolicyError),
    Train(TrainError),
    /// A stored behavior probability is not positive.
    ZeroBehaviorProb { step: usize },
    EmptyFullSet { task_index: usize },
    EmptyArchive,
}

impl fmt::Display for CompsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompsError::Policy(e) => e.fmt(f),
            CompsError::Train(e) => e.fmt(f),
            CompsError::ZeroBehaviorProb { step } => {
                write!(f, "archived behavior probability at step {step} is not positive")
            }
            CompsError::EmptyFullSet { task_index } => {
                write!(f, "task {task_index} has no archived episodes")
            }
            CompsError::EmptyArchive => f.write_str("meta-update needs at least one archived task"),
        }
    }
}

impl From<PolicyError> for CompsError {
    fn from(e: PolicyError) -> Self {
        CompsError::Policy(e)
    }
}

impl From<TrainError> for CompsError {
    fn from(e: TrainError) -> Self {
        CompsError::Train(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaGradMode {
    /// Gradient of the cloning loss at the adapted parameters.
    FirstOrder,
    /// Central differences through adaptation and loss. Costs two loss
    /// evaluations per parameter; meant for tiny validation nets.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    /// Meta learning rate.
    pub kappa: f64,
    /// Inner (adaptation) learning rate.
    pub eta: f64,
    pub gamma: f64,
    /// Tasks sampled per meta-iteration.
    pub batch_tasks: usize,
    /// Meta-iterations per task.
    pub meta_iterations: usize,
    /// Importance ratios are clipped to `[1 / ratio_clip, ratio_clip]`.
    pub ratio_clip: f64,
    pub grad_mode: MetaGradMode,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            kappa: 1e-4,
            eta: 1e-3,
            gamma: 0.8,
            batch_tasks: 5,
            meta_iterations: 100,
            ratio_clip: 10.0,
            grad_mode: MetaGradMode::FirstOrder,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskArchiveEntry {
    pub task_index: usize,
    /// Every episode collected on the task, in order.
    pub full_set: Vec<Episode>,
    /// Index into `full_set` of the best episode.
    pub skilled_index: usize,
}

impl TaskArchiveEntry {
    pub fn skilled(&self) -> &Episode {
        &self.full_set[self.skilled_index]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaState {
    pub theta0: PolicyParams,
    pub archive: Vec<TaskArchiveEntry>,
}

impl MetaState {
    pub fn new(theta0: PolicyParams) -> Self {
        MetaState { theta0, archive: Vec::new() }
    }

    /// Completed tasks.
    pub fn tasks_seen(&self) -> usize {
        self.archive.len()
    }
}

/// Importance ratio clipped to `[1 / clip, clip]`.
pub fn clipped_ratio(current: f64, behavior: f64, clip: f64) -> f64 {
    (current / behavior).clamp(1.0 / clip, clip)
}

/// One off-policy REINFORCE step from `theta0` on an archived episode.
pub fn off_policy_adapt(theta0: &PolicyParams, e: &Episode, cfg: &MetaConfig) -> Result<PolicyParams, CompsError> {
    if let Some(step) = e.steps().iter().position(|s| s.behavior_prob.is_nan() || s.behavior_prob <= 0.0) {
        return Err(CompsError::ZeroBehaviorProb { step });
    }
    let returns = discounted_returns(&e.rewards(), cfg.gamma);
    let mut grad = vec![0.0; theta0.len()];
    for (s, g) in e.steps().iter().zip(returns) {
        if g == 0.0 {
            continue;
        }
        theta0.accumulate_log_prob_grad_with(
            &s.features,
            s.action,
            |p| clipped_ratio(p, s.behavior_prob, cfg.ratio_clip) * g,
            &mut grad,
        )?;
    }
    let mut out = theta0.clone();
    for (t, g) in out.theta.iter_mut().zip(grad) {
        *t += cfg.eta * g;
    }
    Ok(out)
}

/// Negative log-likelihood of the skilled actions, probabilities floored.
pub fn bc_loss(p: &PolicyParams, skilled: &Episode) -> Result<f64, PolicyError> {
    let floor = libm::log(PROB_FLOOR);
    let mut loss = 0.0;
    for s in skilled.steps() {
        loss -= p.log_probs(&s.features)?[s.action.index()].max(floor);
    }
    Ok(loss)
}

/// Gradient of [`bc_loss`] (ignoring the floor).
pub fn bc_loss_grad(p: &PolicyParams, skilled: &Episode) -> Result<Vec<f64>, PolicyError> {
    let mut grad = vec![0.0; p.len()];
    for s in skilled.steps() {
        p.accumulate_log_prob_grad(&s.features, s.action, -1.0, &mut grad)?;
    }
    Ok(grad)
}

/// Cloning loss after adapting on episode `n` of `entry`, as a function of `theta0`.
pub fn adapted_bc_loss(
    theta0: &PolicyParams,
    entry: &TaskArchiveEntry,
    n: usize,
    cfg: &MetaConfig,
) -> Result<f64, CompsError> {
    let adapted = off_policy_adapt(theta0, &entry.full_set[n], cfg)?;
    Ok(bc_loss(&adapted, entry.skilled())?)
}

/// Meta-gradient for a fixed archived episode `n`.
pub fn meta_gradient_for_episode(
    theta0: &PolicyParams,
    entry: &TaskArchiveEntry,
    n: usize,
    cfg: &MetaConfig,
    mode: MetaGradMode,
) -> Result<Vec<f64>, CompsError> {
    match mode {
        MetaGradMode::FirstOrder => {
            let adapted = off_policy_adapt(theta0, &entry.full_set[n], cfg)?;
            Ok(bc_loss_grad(&adapted, entry.skilled())?)
        }
        MetaGradMode::FiniteDifference => {
            let mut probe = theta0.clone();
            let mut grad = vec![0.0; theta0.len()];
            for k in 0..theta0.len() {
                let base = theta0.theta[k];
                probe.theta[k] = base + FD_STEP;
                let up = adapted_bc_loss(&probe, entry, n, cfg)?;
                probe.theta[k] = base - FD_STEP;
                let down = adapted_bc_loss(&probe, entry, n, cfg)?;
                probe.theta[k] = base;
                grad[k] = (up - down) / (2.0 * FD_STEP);
            }
            Ok(grad)
        }
    }
}

/// Meta-gradient for one task with a uniformly drawn archived episode.
pub fn meta_gradient<R: Rng + ?Sized>(
    theta0: &PolicyParams,
    entry: &TaskArchiveEntry,
    cfg: &MetaConfig,
    rng: &mut R,
) -> Result<Vec<f64>, CompsError> {
    if entry.full_set.is_empty() {
        return Err(CompsError::EmptyFullSet { task_index: entry.task_index });
    }
    let n = rng.gen_range(0..entry.full_set.len());
    meta_gradient_for_episode(theta0, entry, n, cfg, cfg.grad_mode)
}

/// Runs `meta_iterations` descent steps on `theta0` with prefactor
/// `kappa / tasks_seen`, each over `min(batch_tasks, tasks_seen)` distinct
/// archived tasks drawn uniformly. Gradients are summed in task order.
pub fn meta_update<R: Rng + ?Sized>(state: &MetaState, cfg: &MetaConfig, rng: &mut R) -> Result<MetaState, CompsError> {
    let seen = state.tasks_seen();
    if seen == 0 {
        return Err(CompsError::EmptyArchive);
    }
    let step = cfg.kappa / seen as f64;
    let batch = cfg.batch_tasks.clamp(1, seen);
    let mut theta0 = state.theta0.clone();
    for _ in 0..cfg.meta_iterations {
        let mut picks = index::sample(rng, seen, batch).into_vec();
        picks.sort_unstable();
        let mut total = vec![0.0; theta0.len()];
        for i in picks {
            let g = meta_gradient(&theta0, &state.archive[i], cfg, rng)?;
            for (t, gi) in total.iter_mut().zip(g) {
                *t += gi;
            }
        }
        for (t, g) in theta0.theta.iter_mut().zip(total) {
            *t -= step * g;
        }
    }
    Ok(MetaState { theta0, archive: state.archive.clone() })
}

/// RL phase of a CoMPS step: trains on `sim` from the current `theta0` and
/// appends the task to the archive. Returns the per-episode reward curve.
pub fn train_and_archive<R: Rng + ?Sized>(
    state: &mut MetaState,
    sim: &mut Simulator,
    rl_cfg: &RLConfig,
    enc: &EncoderConfig,
    rng: &mut R,
) -> Result<Vec<u64>, CompsError> {
    let outcome = reinforce::train_task(&state.theta0, sim, rl_cfg, enc, rng)?;
    state.archive.push(TaskArchiveEntry {
        task_index: state.archive.len(),
        full_set: outcome.full_set,
        skilled_index: outcome.skilled_index,
    });
    Ok(outcome.per_episode_rewards)
}

/// Full CoMPS step on a new task: RL phase, archive, meta-update.
pub fn run_comps_step<R: Rng + ?Sized, M: Rng + ?Sized>(
    state: &MetaState,
    sim: &mut Simulator,
    rl_cfg: &RLConfig,
    meta_cfg: &MetaConfig,
    enc: &EncoderConfig,
    rl_rng: &mut R,
    meta_rng: &mut M,
) -> Result<(MetaState, Vec<u64>), CompsError> {
    let mut next = state.clone();
    let rewards = train_and_archive(&mut next, sim, rl_cfg, enc, rl_rng)?;
    let next = meta_update(&next, meta_cfg, meta_rng)?;
    Ok((next, rewards))
}
