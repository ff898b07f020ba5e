//! Run configuration: one TOML file with a section per concern.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use navtl::trainer::TrainConfig;

use crate::usage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `train.seed` is the run seed for every command.
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n_spawns: usize,
    pub cap_m: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { n_spawns: 10, cap_m: 2000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub meta_envs: usize,
    pub offline_steps: u64,
    /// Step budget of the e2e online run; other train types get twice this.
    pub online_steps: u64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self { meta_envs: 4, offline_steps: 50_000, online_steps: 30_000 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| usage(e.to_string()))?;
        if self.eval.n_spawns == 0 {
            return Err(usage("eval.n_spawns must be at least 1"));
        }
        if !(self.eval.cap_m >= 0.0 && self.eval.cap_m.is_finite()) {
            return Err(usage(format!("eval.cap_m must be a finite non-negative distance, got {}", self.eval.cap_m)));
        }
        if self.pipeline.meta_envs == 0 || self.pipeline.meta_envs > navtl::env::presets::META_COUNT {
            return Err(usage(format!("pipeline.meta_envs must be in 1..={}", navtl::env::presets::META_COUNT)));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}
