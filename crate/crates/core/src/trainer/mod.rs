//! Double-DQN training: epsilon-greedy acting, prioritized replay, target
//! sync, multi-environment switching for the offline phase and freeze-masked
//! fine-tuning for the online phase.

mod config;
pub mod corridor;
mod floorplan_env;
mod log;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::ActionError;
use crate::env::{EnvError, FloorPlan};
use crate::nn::{build_desk_network, Network, NetworkSpec, NnError, Tensor, TrainType};
use crate::replay::{PrioritizedReplay, ReplayError, Transition};

pub use config::TrainConfig;
pub use floorplan_env::{compute_reward, FloorPlanEnv};
pub use log::{EpisodeRecord, ReturnLog, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: u64, loss: f32 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub reward: f64,
    pub terminal: bool,
}

/// A resettable episodic environment whose full state can be saved and
/// restored.
pub trait Environment {
    type State: Clone + PartialEq + fmt::Debug;

    fn observe(&self) -> Result<Vec<f32>, TrainError>;
    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Result<EnvStep, TrainError>;
    /// Start a new episode after a terminal step or a time limit.
    fn respawn(&mut self, rng: &mut ChaCha8Rng);
    /// State used the first time the environment becomes active.
    fn initial_state(&self) -> Self::State;
    fn save(&self) -> Self::State;
    fn restore(&mut self, state: Self::State);
}

/// Uniform random action with probability `epsilon`, otherwise the greedy
/// one (lowest index among ties).
pub fn epsilon_greedy(q: &[f32], epsilon: f64, rng: &mut impl Rng) -> usize {
    assert!(!q.is_empty(), "empty Q vector");
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(q: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Double-DQN targets: the behaviour network picks the next action, the
/// target network scores it.
pub fn ddqn_target(
    behaviour: &Network,
    target: &Network,
    rewards: &[f32],
    next_states: &Tensor,
    terminal: &[bool],
    gamma: f64,
) -> Result<Vec<f32>, NnError> {
    let n = rewards.len();
    if terminal.len() != n || next_states.batch() != n {
        return Err(NnError::ShapeMismatch {
            context: "ddqn_target batch".into(),
            expected: vec![n],
            actual: vec![terminal.len(), next_states.batch()],
        });
    }
    if terminal.iter().all(|&t| t) || gamma == 0.0 {
        return Ok(rewards.to_vec());
    }
    let q_select = behaviour.forward(next_states)?;
    let q_eval = target.forward(next_states)?;
    Ok((0..n)
        .map(|k| {
            if terminal[k] {
                rewards[k]
            } else {
                let a = argmax(q_select.item(k));
                (rewards[k] as f64 + gamma * q_eval.item(k)[a] as f64) as f32
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The moving-average return reached the baseline.
    Matched,
    /// The step budget ran out.
    Cap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Matched => "matched",
            StopReason::Cap => "cap",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One environment switch: the outgoing state that was saved and the state
/// the incoming environment was restored to.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent<S> {
    pub step: u64,
    pub from: usize,
    pub saved: S,
    pub to: usize,
    pub restored: S,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    pub network: Network,
    pub log: ReturnLog,
    pub stop_reason: StopReason,
    pub steps: u64,
    pub gradient_steps: u64,
    /// Sum of every reward collected, accumulated step by step.
    pub total_reward: f64,
    /// Active environment at each step.
    pub env_trace: Vec<usize>,
    pub switches: Vec<SwitchEvent<S>>,
}

/// Run the training loop over `envs`, starting from `network`.
///
/// Every `switch_interval` steps the active environment's state is saved, the
/// next environment (cyclically) becomes active and its saved state is
/// restored; an environment never visited before starts from its initial
/// state. `stop` is consulted before the first step and after each finished
/// episode.
pub fn train<E: Environment>(
    envs: &mut [E],
    mut network: Network,
    cfg: &TrainConfig,
    mut stop: impl FnMut(&ReturnLog) -> bool,
) -> Result<TrainOutcome<E::State>, TrainError> {
    cfg.validate()?;
    if envs.is_empty() {
        return Err(TrainError::Config("no environments to train on".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut target = network.target_copy();
    let mut replay: PrioritizedReplay<Transition> = PrioritizedReplay::new(cfg.replay)?;
    let mut log = ReturnLog::new(cfg.moving_avg_window);
    let mut saved: Vec<Option<E::State>> = vec![None; envs.len()];
    let mut switches = Vec::new();
    let mut env_trace = Vec::with_capacity(cfg.max_steps.min(1 << 24) as usize);
    let lr = cfg.lr as f32;
    let input_shape = network.input_shape().to_vec();

    let mut current = 0;
    let first = envs[0].initial_state();
    envs[0].restore(first);
    let mut obs: Arc<[f32]> = envs[current].observe()?.into();

    let mut episode_return = 0.0f64;
    let mut episode_steps = 0u64;
    let mut episode_loss = (0.0f64, 0u64);
    let mut total_reward = 0.0f64;
    let mut gradient_steps = 0u64;
    let mut stop_reason = StopReason::Cap;
    let mut step = 0u64;

    if stop(&log) {
        stop_reason = StopReason::Matched;
    }
    while stop_reason == StopReason::Cap && step < cfg.max_steps {
        if let Some(m) = cfg.switch_interval {
            if envs.len() > 1 && step > 0 && step.is_multiple_of(m) {
                let out_state = envs[current].save();
                saved[current] = Some(out_state.clone());
                let from = current;
                current = (current + 1) % envs.len();
                let in_state = saved[current].clone().unwrap_or_else(|| envs[current].initial_state());
                envs[current].restore(in_state.clone());
                switches.push(SwitchEvent { step, from, saved: out_state, to: current, restored: in_state });
                obs = envs[current].observe()?.into();
            }
        }
        env_trace.push(current);

        let epsilon = cfg.epsilon_at(step);
        let q = network.q_values(&obs)?;
        let action = epsilon_greedy(&q, epsilon, &mut rng);
        let outcome = envs[current].step(action, &mut rng)?;
        let next_obs: Arc<[f32]> = envs[current].observe()?.into();
        replay.push(Transition {
            state: obs,
            action,
            reward: outcome.reward as f32,
            next_state: next_obs.clone(),
            terminal: outcome.terminal,
        });
        obs = next_obs;
        total_reward += outcome.reward;
        episode_return += outcome.reward;
        episode_steps += 1;
        step += 1;

        if step.is_multiple_of(cfg.n_train) && replay.len() >= cfg.n_batch {
            let loss = train_batch(&mut network, &target, &mut replay, cfg, &input_shape, step, lr, &mut rng)?;
            gradient_steps += 1;
            episode_loss.0 += loss as f64;
            episode_loss.1 += 1;
        }
        if step.is_multiple_of(cfg.n_target) {
            target = network.target_copy();
        }

        if outcome.terminal || episode_steps >= cfg.max_episode_steps {
            let loss = (episode_loss.1 > 0).then(|| episode_loss.0 / episode_loss.1 as f64);
            log.record(step, episode_return, episode_steps, epsilon, current, loss, true);
            episode_return = 0.0;
            episode_steps = 0;
            episode_loss = (0.0, 0);
            envs[current].respawn(&mut rng);
            obs = envs[current].observe()?.into();
            if stop(&log) {
                stop_reason = StopReason::Matched;
            }
        }
    }
    if episode_steps > 0 {
        let loss = (episode_loss.1 > 0).then(|| episode_loss.0 / episode_loss.1 as f64);
        log.record(step, episode_return, episode_steps, cfg.epsilon_at(step), current, loss, false);
    }
    Ok(TrainOutcome { network, log, stop_reason, steps: step, gradient_steps, total_reward, env_trace, switches })
}

#[allow(clippy::too_many_arguments)]
fn train_batch(
    network: &mut Network,
    target: &Network,
    replay: &mut PrioritizedReplay<Transition>,
    cfg: &TrainConfig,
    input_shape: &[usize],
    step: u64,
    lr: f32,
    rng: &mut ChaCha8Rng,
) -> Result<f32, TrainError> {
    let sample = replay.sample(cfg.n_batch, cfg.beta_at(step), rng)?;
    let items: Vec<&Transition> = sample.indices.iter().map(|&i| replay.get(i).expect("sampled slot")).collect();
    let states = stack(items.iter().map(|t| &t.state[..]), input_shape)?;
    let next_states = stack(items.iter().map(|t| &t.next_state[..]), input_shape)?;
    let rewards: Vec<f32> = items.iter().map(|t| t.reward).collect();
    let terminal: Vec<bool> = items.iter().map(|t| t.terminal).collect();
    let actions: Vec<usize> = items.iter().map(|t| t.action).collect();
    let targets = ddqn_target(network, target, &rewards, &next_states, &terminal, cfg.gamma)?;
    let stats = network.train_step(&states, &targets, &actions, &sample.weights, lr).map_err(|e| match e {
        NnError::Divergence { loss } => TrainError::Divergence { step, loss },
        other => other.into(),
    })?;
    replay.update_priorities(&sample.indices, &stats.td_errors)?;
    Ok(stats.loss)
}

fn stack<'a>(items: impl Iterator<Item = &'a [f32]>, item_shape: &[usize]) -> Result<Tensor, NnError> {
    let item_len: usize = item_shape.iter().product();
    let mut data = Vec::new();
    let mut n = 0;
    for it in items {
        data.extend_from_slice(it);
        n += 1;
    }
    let mut shape = vec![n];
    shape.extend_from_slice(item_shape);
    if data.len() != n * item_len {
        return Err(NnError::ShapeMismatch {
            context: "replay observations".into(),
            expected: shape,
            actual: vec![data.len()],
        });
    }
    Tensor::new(shape, data)
}

/// Desk-scale dueling network for the config's camera and action space.
pub fn desk_spec(cfg: &TrainConfig) -> Result<NetworkSpec, NnError> {
    build_desk_network(cfg.camera.height, cfg.camera.width, cfg.action.action_count())
}

/// Offline phase: train a fresh network end to end over the environment
/// library, switching every `switch_interval` steps.
pub fn train_offline(
    library: &[FloorPlan],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<crate::env::AgentPose>, TrainError> {
    if cfg.train_type != TrainType::E2e {
        return Err(TrainError::Config(format!(
            "offline training updates the whole network; got train type {}",
            cfg.train_type
        )));
    }
    let network = Network::new(desk_spec(cfg)?, cfg.seed)?;
    let mut envs = library.iter().map(|p| FloorPlanEnv::new(p.clone(), cfg)).collect::<Result<Vec<_>, _>>()?;
    train(&mut envs, network, cfg, |_| false)
}

/// Online phase: fine-tune a copy of `init` on one environment with the
/// config's train type, stopping once the moving-average return reaches
/// `baseline` or after `max_steps`.
pub fn train_online(
    plan: &FloorPlan,
    init: &Network,
    cfg: &TrainConfig,
    baseline: Option<f64>,
) -> Result<TrainOutcome<crate::env::AgentPose>, TrainError> {
    let expected = desk_spec(cfg)?;
    if expected.digest() != init.spec().digest() {
        return Err(NnError::SpecMismatch { expected: expected.digest(), actual: init.spec().digest() }.into());
    }
    let mut network = init.clone();
    network.set_train_type(cfg.train_type);
    network.reset_optimizer_state();
    let mut envs = vec![FloorPlanEnv::new(plan.clone(), cfg)?];
    let single = TrainConfig { switch_interval: None, ..cfg.clone() };
    train(&mut envs, network, &single, |log| baseline.is_some_and(|b| log.moving_avg() >= b))
}
