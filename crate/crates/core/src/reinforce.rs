//! Plain REINFORCE on a single task.
//!
//! One gradient step per episode, no baseline, returns discounted from every
//! recorded step. Every step stores the probability the acting policy gave to
//! its action so the episode can later be replayed off-policy.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{encode_state, Action, EncoderConfig, EnvError, Simulator};
use crate::policy::{sample_action, PolicyError, PolicyParams};

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    Policy(PolicyError),
    Env(EnvError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Policy(e) => e.fmt(f),
            TrainError::Env(e) => e.fmt(f),
        }
    }
}

impl From<PolicyError> for TrainError {
    fn from(e: PolicyError) -> Self {
        TrainError::Policy(e)
    }
}

impl From<EnvError> for TrainError {
    fn from(e: EnvError) -> Self {
        TrainError::Env(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub features: Vec<f64>,
    pub action: Action,
    pub reward: u32,
    /// Probability of `action` under the policy that collected the step.
    pub behavior_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    steps: Vec<StepRecord>,
    total_reward: u64,
}

impl Episode {
    pub fn new(steps: Vec<StepRecord>) -> Self {
        let total_reward = steps.iter().map(|s| s.reward as u64).sum();
        Episode { steps, total_reward }
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// Undiscounted packet count.
    pub fn total_reward(&self) -> u64 {
        self.total_reward
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RLConfig {
    /// Episodes per task.
    pub episodes: usize,
    pub gamma: f64,
    /// Learning rate.
    pub eta: f64,
}

impl Default for RLConfig {
    fn default() -> Self {
        RLConfig { episodes: 50, gamma: 0.8, eta: 0.001 }
    }
}

/// `G[t] = r[t] + gamma * G[t + 1]`, computed backwards.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (g, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    out
}

/// `sum_t grad log pi_theta(a_t | s_t) * G[t]` with the current parameters.
pub fn policy_gradient(p: &PolicyParams, e: &Episode, gamma: f64) -> Result<Vec<f64>, PolicyError> {
    let returns = discounted_returns(&e.rewards(), gamma);
    let mut grad = vec![0.0; p.len()];
    for (step, g) in e.steps().iter().zip(returns) {
        if g != 0.0 {
            p.accumulate_log_prob_grad(&step.features, step.action, g, &mut grad)?;
        }
    }
    Ok(grad)
}

/// Gradient ascent step `theta + eta * grad`.
pub fn reinforce_update(p: &PolicyParams, e: &Episode, cfg: &RLConfig) -> Result<PolicyParams, PolicyError> {
    let grad = policy_gradient(p, e, cfg.gamma)?;
    let mut next = p.clone();
    for (t, g) in next.theta.iter_mut().zip(grad) {
        *t += cfg.eta * g;
    }
    Ok(next)
}

/// Rolls out one full episode with `p`, recording behavior probabilities.
pub fn run_episode<R: Rng + ?Sized>(
    p: &PolicyParams,
    sim: &mut Simulator,
    enc: &EncoderConfig,
    rng: &mut R,
) -> Result<Episode, TrainError> {
    let mut state = sim.reset(rng);
    let mut steps = Vec::with_capacity(sim.task().horizon as usize);
    while !state.is_terminal(sim.task()) {
        let features = encode_state(&state, sim.task(), enc);
        let probs = p.action_probs(&features)?;
        let (action, behavior_prob) = sample_action(rng, &probs);
        let tr = sim.step(&state, action, rng)?;
        steps.push(StepRecord { features, action, reward: tr.reward, behavior_prob });
        state = tr.next;
    }
    Ok(Episode::new(steps))
}

/// Index of the highest undiscounted total; ties go to the earliest episode.
pub fn select_skilled(totals: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &t) in totals.iter().enumerate() {
        if best.is_none_or(|(_, b)| t > b) {
            best = Some((i, t));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub theta_star: PolicyParams,
    pub full_set: Vec<Episode>,
    pub skilled_index: usize,
    pub per_episode_rewards: Vec<u64>,
}

impl TaskOutcome {
    pub fn skilled(&self) -> &Episode {
        &self.full_set[self.skilled_index]
    }
}

/// Alternates rollout and update for `cfg.episodes` episodes starting at
/// `theta0`. Each episode gets its own stream seeded from one draw of `rng`,
/// so the parent stream advances identically whatever the policy does.
pub fn train_task<R: Rng + ?Sized>(
    theta0: &PolicyParams,
    sim: &mut Simulator,
    cfg: &RLConfig,
    enc: &EncoderConfig,
    rng: &mut R,
) -> Result<TaskOutcome, TrainError> {
    let mut theta = theta0.clone();
    let mut full_set = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let mut episode_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let episode = run_episode(&theta, sim, enc, &mut episode_rng)?;
        theta = reinforce_update(&theta, &episode, cfg)?;
        full_set.push(episode);
    }
    let per_episode_rewards: Vec<u64> = full_set.iter().map(Episode::total_reward).collect();
    let skilled_index = select_skilled(&per_episode_rewards).unwrap_or(0);
    Ok(TaskOutcome { theta_star: theta, full_set, skilled_index, per_episode_rewards })
}
