use serde::{Deserialize, Serialize};

use crate::action::ActionSpaceSpec;
use crate::env::{Camera, D_CRASH};
use crate::nn::TrainType;
use crate::replay::ReplayConfig;

use super::TrainError;

/// Every knob of a training run. Missing keys take the defaults below;
/// unknown keys are rejected when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon decays linearly; `None` means half of `max_steps`.
    pub epsilon_anneal_steps: Option<u64>,
    pub n_target: u64,
    pub n_train: u64,
    pub n_batch: usize,
    /// Environment switch interval; `None` never switches.
    pub switch_interval: Option<u64>,
    pub max_steps: u64,
    /// Episodes longer than this are cut off (no terminal flag) and respawned.
    pub max_episode_steps: u64,
    pub train_type: TrainType,
    pub lr: f64,
    pub seed: u64,
    pub d_crash: f64,
    pub d_safe: f64,
    pub reward_rays: usize,
    pub moving_avg_window: usize,
    pub action: ActionSpaceSpec,
    pub camera: Camera,
    pub replay: ReplayConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_anneal_steps: None,
            n_target: 1000,
            n_train: 4,
            n_batch: 32,
            switch_interval: Some(1000),
            max_steps: 150_000,
            max_episode_steps: 500,
            train_type: TrainType::E2e,
            lr: 1e-4,
            seed: 0,
            d_crash: D_CRASH,
            d_safe: 3.0,
            reward_rays: 32,
            moving_avg_window: 100,
            action: ActionSpaceSpec::default(),
            camera: Camera::default(),
            replay: ReplayConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} {e} outside [0, 1]"));
            }
        }
        if self.n_target == 0 || self.n_train == 0 || self.n_batch == 0 || self.max_episode_steps == 0 {
            return bad("n_target, n_train, n_batch and max_episode_steps must be at least 1".into());
        }
        if self.switch_interval == Some(0) {
            return bad("switch_interval must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {}", self.lr));
        }
        if !(self.d_crash > 0.0 && self.d_safe > 0.0) {
            return bad("d_crash and d_safe must be positive".into());
        }
        if self.moving_avg_window == 0 || self.reward_rays == 0 {
            return bad("moving_avg_window and reward_rays must be at least 1".into());
        }
        if self.n_batch > self.replay.capacity {
            return bad(format!("n_batch {} exceeds replay capacity {}", self.n_batch, self.replay.capacity));
        }
        self.action.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        if self.camera.height == 0 || self.camera.width == 0 {
            return bad("camera must be at least 1x1".into());
        }
        Ok(())
    }

    fn anneal_steps(&self) -> u64 {
        self.epsilon_anneal_steps.unwrap_or(self.max_steps / 2)
    }

    /// Linearly annealed exploration rate at `step`.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        let n = self.anneal_steps();
        let frac = if n == 0 { 1.0 } else { (step as f64 / n as f64).min(1.0) };
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn beta_at(&self, step: u64) -> f64 {
        self.replay.beta_at(step, self.max_steps)
    }
}
