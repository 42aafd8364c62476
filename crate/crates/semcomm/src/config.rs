//! Run configuration: a flat TOML file whose keys mirror the CLI flags.
//!
//! ```toml
//! seed = 7
//! mode = "sl"
//! epochs = 20
//! lr = 0.001
//! batch_size = 128
//! noise_factor = 0.5
//! samples = 50000
//! nasar = 0.5
//! placement = "input"
//! kind = "nasar"
//! grid = [0.1, 0.2, 0.3, 0.4, 0.5]
//! jobs = 1
//! sl_aux_weight = 0.1
//! stratified = true
//! retrain_per_point = false
//! ```
//!
//! Every key is optional. Flags override file values; anything left unset
//! takes its default.

use std::path::Path;

use semcomm_core::channel::{ChannelConfig, Placement};
use semcomm_core::train::{Mode, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::experiments::{SweepKind, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub noise_factor: Option<f64>,
    pub samples: Option<usize>,
    pub nasar: Option<f64>,
    pub placement: Option<Placement>,
    pub kind: Option<SweepKind>,
    pub grid: Option<Vec<f64>>,
    pub jobs: Option<usize>,
    pub sl_aux_weight: Option<f64>,
    pub stratified: Option<bool>,
    pub retrain_per_point: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Values set in `over` win.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            seed: over.seed.or(self.seed),
            mode: over.mode.or(self.mode),
            epochs: over.epochs.or(self.epochs),
            lr: over.lr.or(self.lr),
            batch_size: over.batch_size.or(self.batch_size),
            noise_factor: over.noise_factor.or(self.noise_factor),
            samples: over.samples.or(self.samples),
            nasar: over.nasar.or(self.nasar),
            placement: over.placement.or(self.placement),
            kind: over.kind.or(self.kind),
            grid: over.grid.or(self.grid),
            jobs: over.jobs.or(self.jobs),
            sl_aux_weight: over.sl_aux_weight.or(self.sl_aux_weight),
            stratified: over.stratified.or(self.stratified),
            retrain_per_point: over.retrain_per_point.or(self.retrain_per_point),
        }
    }

    /// Apply defaults and validate.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let d = TrainingConfig::default();
        let mode = self.mode.unwrap_or_default();
        let placement = self.placement.unwrap_or_default();
        let seed = self.seed.unwrap_or(0);
        let training = TrainingConfig {
            mode,
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            noise_factor: self.noise_factor.unwrap_or(d.noise_factor),
            sample_count: self.samples.unwrap_or(d.sample_count),
            seed,
            sl_aux_weight: self.sl_aux_weight.unwrap_or(d.sl_aux_weight),
            placement,
        };
        training.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let channel = ChannelConfig { nasar: self.nasar.unwrap_or(0.5), placement, seed };
        channel.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let kind = self.kind.unwrap_or_default();
        let sweep = SweepSpec {
            kind,
            grid: self.grid.clone().unwrap_or_else(|| kind.default_grid()),
            base_seed: seed,
            training,
            channel,
            stratified: self.stratified.unwrap_or(true),
            retrain_per_point: self.retrain_per_point.unwrap_or(false),
        };
        let jobs = self.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be >= 1".into()));
        }
        Ok(ResolvedConfig { training, channel, sweep, jobs })
    }
}

/// Fully defaulted configuration, echoed into every run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub training: TrainingConfig,
    pub channel: ChannelConfig,
    pub sweep: SweepSpec,
    pub jobs: usize,
}
