//! Run configuration, read from TOML. Every field has a default, so an empty
//! file is a valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::features::PyramidConfig;
use crate::graph::AuxOffsets;
use crate::learning::TrainConfig;
use crate::phraselets::PhraseletConfig;

/// Shape of the models to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Template rows and columns, in cells.
    pub template: (usize, usize),
    /// Torso diameter, in cells, that training poses are scaled to.
    pub torso_cells: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            template: (5, 5),
            torso_cells: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub pyramid: PyramidConfig,
    pub phraselets: PhraseletConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub offsets: AuxOffsets,
}

/// Environment variable that overrides every seed.
pub const SEED_ENV: &str = "POSEKIT_SEED";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PoseError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PoseError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always encodes")
    }

    pub fn validate(&self) -> Result<()> {
        self.pyramid.validate()?;
        if self.phraselets.k == 0 {
            return Err(PoseError::Config("phraselets.k must be positive".into()));
        }
        if !(self.phraselets.sigma > 0.0) || !(self.phraselets.overlap_radius > 0.0) {
            return Err(PoseError::Config("phraselet sigma and overlap radius must be positive".into()));
        }
        if self.model.template.0 == 0 || self.model.template.1 == 0 || !(self.model.torso_cells > 0.0) {
            return Err(PoseError::Config("model template and torso size must be positive".into()));
        }
        if !(self.train.c >= 0.0) {
            return Err(PoseError::Config(format!("train.c = {}", self.train.c)));
        }
        Ok(())
    }

    /// Replaces the seeds with `seed`, then with the environment override if set.
    pub fn apply_seed(&mut self, seed: Option<u64>) -> Result<()> {
        let env = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| PoseError::Config(format!("{SEED_ENV}={v} is not an integer")))?,
            ),
            Err(_) => None,
        };
        if let Some(s) = env.or(seed) {
            self.seed = s;
            self.phraselets.seed = s;
        }
        Ok(())
    }
}
