//! Flat TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Denominator, LossConfig, TrainConfig};
use crate::error::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Every training and loss knob in one flat table. Missing keys take the
/// defaults of [`TrainConfig`] and [`LossConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// `0` disables early stopping.
    pub patience: usize,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub beta: f64,
    pub denominator: Denominator,
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    /// Write a checkpoint every this many epochs; `0` only writes the final one.
    pub checkpoint_every: usize,
    /// Stop once full training-set accuracy reaches this value at an epoch
    /// end; `0` disables the check.
    pub stop_at_accuracy: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let l = LossConfig::default();
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            seed: t.seed,
            patience: 0,
            lambda: l.lambda,
            k: l.k,
            beta: l.beta,
            denominator: l.denominator,
            hidden: vec![100, 100],
            checkpoint_every: 0,
            stop_at_accuracy: 0.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.train().validate()?;
        cfg.loss().validate()?;
        if !(0.0..=1.0).contains(&cfg.stop_at_accuracy) {
            return Err(Error::Config(format!("stop_at_accuracy must lie in [0, 1], got {}", cfg.stop_at_accuracy)));
        }
        if cfg.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serialises")
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed: self.seed,
            patience: (self.patience > 0).then_some(self.patience),
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            k: self.k,
            beta: self.beta,
            denominator: self.denominator,
        }
    }
}
