use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::losses::LossWeights;
use crate::nets::ModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    CycleGan,
    #[default]
    GpCycleGan,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::CycleGan => "cyclegan",
            Variant::GpCycleGan => "gpcyclegan",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cyclegan" => Ok(Variant::CycleGan),
            "gpcyclegan" => Ok(Variant::GpCycleGan),
            other => Err(format!("unknown variant {other:?} (expected cyclegan|gpcyclegan)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialForm {
    #[default]
    Log,
    LeastSquares,
}

/// Hyperparameters for all three training steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub lr_classifier: f64,
    pub lr_gan: f64,
    pub lr_finetune: f64,
    pub epochs_classifier: usize,
    pub epochs_gan: usize,
    pub epochs_finetune: usize,
    pub batch_size: usize,
    pub early_stop_patience: usize,
    /// 0 disables the pool.
    pub image_pool_size: usize,
    pub adversarial_form: AdversarialForm,
    pub seed: u64,
    pub channels: usize,
    pub weights: LossWeights,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::default(),
            lr_classifier: 4e-4,
            lr_gan: 2e-4,
            lr_finetune: 1e-4,
            epochs_classifier: 50,
            epochs_gan: 15,
            epochs_finetune: 10,
            batch_size: 32,
            early_stop_patience: 5,
            image_pool_size: 50,
            adversarial_form: AdversarialForm::default(),
            seed: 0,
            channels: 1,
            weights: LossWeights::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lrs = [self.lr_classifier, self.lr_gan, self.lr_finetune];
        if lrs.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.epochs_classifier == 0 || self.epochs_gan == 0 || self.epochs_finetune == 0 {
            return Err(Error::Config("epoch counts must be at least 1".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::Config("early_stop_patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::BadChannelRequest(self.channels));
        }
        self.weights.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Dotted keys whose values differ between two configurations.
    pub fn diff(&self, other: &TrainConfig) -> Result<Vec<String>> {
        let a = flatten(&toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?);
        let b = flatten(&toml::Value::try_from(other).map_err(|e| Error::Config(e.to_string()))?);
        let mut keys: Vec<String> = a.keys().chain(b.keys()).cloned().collect();
        keys.sort();
        keys.dedup();
        Ok(keys.into_iter().filter(|k| a.get(k) != b.get(k)).collect())
    }
}

/// Flattens nested tables into dotted keys.
pub fn flatten(v: &toml::Value) -> BTreeMap<String, toml::Value> {
    fn go(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    go(&key, v, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    go("", v, &mut out);
    out
}
