//! The run configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use unitrank_core::dataset::WindowConfig;
use unitrank_core::interpret::GlobalConfig;
use unitrank_core::model::ModelConfig;
use unitrank_core::training::TrainConfig;
use unitrank_sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { dataset: "data".into(), checkpoint: "runs/model.json".into(), out: "runs".into() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    pub no_gru: bool,
    pub no_agg: bool,
    pub no_balance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    /// Used when the dataset directory carries no simulator manifest.
    pub window: WindowConfig,
    pub sim: SimConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ablation: Ablations,
    pub interpret: GlobalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            window: WindowConfig::default(),
            sim: SimConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ablation: Ablations::default(),
            interpret: GlobalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Pushes the top-level seed and ablation switches down into the
    /// component configs.
    pub fn resolve(mut self) -> Self {
        self.sim.seed = self.seed;
        self.train.seed = self.seed;
        self.interpret.decoder.seed = self.seed;
        self.model.ablation.no_gru |= self.ablation.no_gru;
        self.model.ablation.no_agg |= self.ablation.no_agg;
        if self.ablation.no_balance {
            self.train.balance = false;
        }
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
