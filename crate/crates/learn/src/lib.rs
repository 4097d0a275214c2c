//! Policy learning for one-step jump episodes: a Gaussian actor-critic on a
//! hand-written MLP, trained with the clipped surrogate objective.

pub mod checkpoint;
pub mod env;
pub mod mlp;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use env::{BanditEnv, Env, EnvStep, JumpEnv, TaskRegion};
pub use policy::{ActorCritic, PolicyConfig};
pub use ppo::{RolloutBatch, TrainConfig};
pub use rollout::collect_rollouts;
pub use train::{train_to_dir, train_to_dir_from, MetricsRow, Trainer};

use pronk_core::simulator::EpisodeConfig;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training experiment file: `[policy]`, `[train]`, `[task]`, `[episode]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub task: TaskRegion,
    pub episode: EpisodeConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, TrainError> {
        let cfg: Self = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.policy
            .validate()
            .and_then(|_| self.train.validate())
            .and_then(|_| self.task.validate())
            .and_then(|_| self.episode.validate())
            .map_err(TrainError::Config)
    }
}
