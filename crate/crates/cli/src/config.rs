use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gpc::dataio::ClaheParams;
use gpc::dataio::synth::SynthPlan;
use gpc::dataio::{PreprocessConfig, SyntheticSpec};
use gpc::training::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::UsageError;

/// Where the split manifests live. Unset paths default to `<root>/<split>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub root: PathBuf,
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

impl Default for DataPaths {
    fn default() -> Self {
        Self { root: PathBuf::from("data"), train: None, val: None, test: None }
    }
}

impl DataPaths {
    pub fn manifest(&self, split: &str) -> PathBuf {
        let explicit = match split {
            "train" => &self.train,
            "val" => &self.val,
            _ => &self.test,
        };
        explicit.clone().unwrap_or_else(|| self.root.join(format!("{split}.csv")))
    }

    /// Pupil ground truth written next to a synthetic manifest.
    pub fn pupils(&self, split: &str) -> PathBuf {
        let m = self.manifest(split);
        m.with_file_name(format!("{}_pupils.csv", m.file_stem().and_then(|s| s.to_str()).unwrap_or(split)))
    }
}

/// Image preparation; the channel count comes from `train.channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub image_size: usize,
    pub equalize: bool,
    pub clahe: ClaheParams,
}

impl Default for ImageConfig {
    fn default() -> Self {
        let p = PreprocessConfig::default();
        Self { image_size: p.image_size, equalize: p.equalize, clahe: p.clahe }
    }
}

/// Synthetic data; the seed is `spec.rng_seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub spec: SyntheticSpec,
    pub plan: SynthPlan,
}

/// Everything a command needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub device: String,
    pub data: DataPaths,
    pub image: ImageConfig,
    pub synth: SynthConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs"),
            device: "cpu".into(),
            data: DataPaths::default(),
            image: ImageConfig::default(),
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (defaults when `None`), then applies `key=value` overrides
    /// with dotted keys, then `GPC_DEVICE`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| UsageError(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| UsageError(format!("override {o:?} is not key=value")))?;
            set_dotted(&mut doc, key.trim(), parse_value(raw.trim()))?;
        }
        let mut cfg: RunConfig = Value::Table(doc).try_into().map_err(|e| UsageError(format!("config: {e}")))?;
        if let Ok(dev) = std::env::var("GPC_DEVICE") {
            cfg.device = dev;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.device != "cpu" {
            bail!(UsageError(format!("device {:?} is not available (only \"cpu\" is supported)", self.device)));
        }
        self.train.validate().map_err(|e| UsageError(e.to_string()))?;
        self.synth.spec.validate().map_err(|e| UsageError(e.to_string()))?;
        if self.image.image_size < 8 {
            bail!(UsageError(format!("image.image_size {} is below the minimum of 8", self.image.image_size)));
        }
        Ok(())
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig { image_size: self.image.image_size, channels: self.train.channels, equalize: self.image.equalize, clahe: self.image.clahe }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string_pretty(self).context("serializing config")
    }
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}").parse::<toml::Table>().ok().and_then(|mut t| t.remove("v")).unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(doc: &mut toml::Table, key: &str, value: Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!(UsageError(format!("bad override key {key:?}")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| UsageError(format!("override {key:?}: {p} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_type() {
        let cfg = RunConfig::load(None, &["train.epochs_gan=3".into(), "train.weights.tau=0.5".into(), "out_dir=x/y".into()]).unwrap();
        assert_eq!(cfg.train.epochs_gan, 3);
        assert_eq!(cfg.train.weights.tau, 0.5);
        assert_eq!(cfg.out_dir, PathBuf::from("x/y"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::load(None, &["train.nope=1".into()]).is_err());
        assert!(RunConfig::load(None, &["nokey".into()]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
