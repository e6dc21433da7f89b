//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `GPCK`, `u32` version, `u8` role, `u32`
//! metadata length and JSON metadata, then two array sections (parameters,
//! optimizer state), each `u32` count followed by entries of `u16` name length,
//! name, `u8` rank, `u64` dims, `u8` dtype tag, `u64` byte length and data.
//! A SHA-256 of everything before it closes the file.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use crate::nets::{
    ClassifierConfig, DiscriminatorConfig, GazeClassifier, Generator, GeneratorConfig, NamedArray, ParamStore,
    PatchDiscriminator,
};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"GPCK";
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Classifier,
    GeneratorWg,
    GeneratorNg,
    DiscriminatorWg,
    DiscriminatorNg,
}

impl Role {
    pub const ALL: [Role; 5] =
        [Role::Classifier, Role::GeneratorWg, Role::GeneratorNg, Role::DiscriminatorWg, Role::DiscriminatorNg];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Classifier => "classifier",
            Role::GeneratorWg => "generator_wg",
            Role::GeneratorNg => "generator_ng",
            Role::DiscriminatorWg => "discriminator_wg",
            Role::DiscriminatorNg => "discriminator_ng",
        }
    }

    fn tag(self) -> u8 {
        Role::ALL.iter().position(|r| *r == self).unwrap_or(0) as u8
    }

    fn from_tag(t: u8) -> Result<Self> {
        Role::ALL.get(t as usize).copied().ok_or_else(|| Error::CorruptCheckpoint(format!("unknown role tag {t}")))
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub val_metric: f64,
    pub config_hash: String,
    pub seed: u64,
    pub channels: usize,
    /// TOML of the training configuration that produced the checkpoint.
    pub config: String,
    /// Network configuration as JSON.
    pub arch: serde_json::Value,
    /// `(epoch, validation metric)` so far, including the epoch-0 baseline.
    #[serde(default)]
    pub history: Vec<(usize, f64)>,
    #[serde(default)]
    pub optimizer_steps: u64,
}

impl CheckpointMeta {
    pub fn new(cfg: &TrainConfig, arch: serde_json::Value, epoch: usize, val_metric: f64) -> Result<Self> {
        Ok(Self {
            epoch,
            val_metric,
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            channels: cfg.channels,
            config: cfg.to_toml()?,
            arch,
            history: Vec::new(),
            optimizer_steps: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub role: Role,
    pub meta: CheckpointMeta,
    pub params: Vec<NamedArray>,
    pub optimizer: Vec<NamedArray>,
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))
}

impl Checkpoint {
    pub fn from_params(role: Role, params: &ParamStore, meta: CheckpointMeta) -> Result<Self> {
        Ok(Self { role, meta, params: params.to_arrays()?, optimizer: Vec::new() })
    }

    pub fn classifier(model: &GazeClassifier, cfg: &TrainConfig, epoch: usize, val: f64) -> Result<Self> {
        let meta = CheckpointMeta::new(cfg, to_json(&model.config)?, epoch, val)?;
        Self::from_params(Role::Classifier, &model.params, meta)
    }

    pub fn generator(role: Role, model: &Generator, cfg: &TrainConfig, epoch: usize, val: f64) -> Result<Self> {
        let meta = CheckpointMeta::new(cfg, to_json(&model.config)?, epoch, val)?;
        Self::from_params(role, &model.params, meta)
    }

    pub fn discriminator(role: Role, model: &PatchDiscriminator, cfg: &TrainConfig, epoch: usize, val: f64) -> Result<Self> {
        let meta = CheckpointMeta::new(cfg, to_json(&model.config)?, epoch, val)?;
        Self::from_params(role, &model.params, meta)
    }

    fn expect_role(&self, allowed: &[Role]) -> Result<()> {
        if allowed.contains(&self.role) {
            Ok(())
        } else {
            Err(Error::RoleMismatch { expected: allowed[0].to_string(), found: self.role.to_string() })
        }
    }

    fn arch<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.meta.arch.clone()).map_err(|e| Error::CorruptCheckpoint(format!("bad arch: {e}")))
    }

    pub fn to_classifier(&self) -> Result<GazeClassifier> {
        self.expect_role(&[Role::Classifier])?;
        let cfg: ClassifierConfig = self.arch()?;
        let shell = GazeClassifier::build(self.meta.channels, 0, &cfg)?;
        Ok(shell.with_params(ParamStore::from_arrays(&self.params, &shell.params)?))
    }

    pub fn to_generator(&self) -> Result<Generator> {
        self.expect_role(&[Role::GeneratorNg, Role::GeneratorWg])?;
        let cfg: GeneratorConfig = self.arch()?;
        let shell = Generator::build(self.meta.channels, 0, &cfg)?;
        Ok(shell.with_params(ParamStore::from_arrays(&self.params, &shell.params)?))
    }

    pub fn to_discriminator(&self) -> Result<PatchDiscriminator> {
        self.expect_role(&[Role::DiscriminatorWg, Role::DiscriminatorNg])?;
        let cfg: DiscriminatorConfig = self.arch()?;
        let shell = PatchDiscriminator::build(self.meta.channels, 0, &cfg)?;
        Ok(shell.with_params(ParamStore::from_arrays(&self.params, &shell.params)?))
    }

    /// Hash of the parameter arrays alone.
    pub fn params_hash(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.params {
            h.update(a.name.as_bytes());
            for d in &a.shape {
                h.update((*d as u64).to_le_bytes());
            }
            for v in &a.data {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Fails with the differing dotted keys when `cfg` is not the producing config.
    pub fn check_config(&self, cfg: &TrainConfig) -> Result<()> {
        if self.meta.config_hash == cfg.hash()? {
            return Ok(());
        }
        let saved = TrainConfig::from_toml(&self.meta.config)?;
        let keys = saved.diff(cfg)?;
        Err(Error::ConfigMismatch(if keys.is_empty() { vec!["<hash>".into()] } else { keys }))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.role.tag());
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::Config(e.to_string()))?;
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        for section in [&self.params, &self.optimizer] {
            out.extend_from_slice(&(section.len() as u32).to_le_bytes());
            for a in section.iter() {
                write_array(&mut out, a)?;
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 + 4 {
            return Err(Error::CorruptCheckpoint("file too short".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::CorruptCheckpoint("hash mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
        }
        let role = Role::from_tag(r.u8()?)?;
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;
        let params = r.section()?;
        let optimizer = r.section()?;
        if r.pos != body.len() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }
        Ok(Self { role, meta, params, optimizer })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingCheckpoint(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn write_array(out: &mut Vec<u8>, a: &NamedArray) -> Result<()> {
    let name = a.name.as_bytes();
    let n: usize = a.shape.iter().product();
    if name.len() > u16::MAX as usize || a.shape.len() > u8::MAX as usize || n != a.data.len() {
        return Err(Error::shape(format!("{:?}", a.shape), a.data.len().to_string()));
    }
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name);
    out.push(a.shape.len() as u8);
    for d in &a.shape {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    out.push(DTYPE_F32);
    out.extend_from_slice(&((a.data.len() * 4) as u64).to_le_bytes());
    for v in &a.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn section(&mut self) -> Result<Vec<NamedArray>> {
        let count = self.u32()? as usize;
        let mut out = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = self.u16()? as usize;
            let name = String::from_utf8(self.take(len)?.to_vec())
                .map_err(|_| Error::CorruptCheckpoint("parameter name is not UTF-8".into()))?;
            let rank = self.u8()? as usize;
            let shape = (0..rank).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            if self.u8()? != DTYPE_F32 {
                return Err(Error::CorruptCheckpoint(format!("unsupported dtype for {name}")));
            }
            let nbytes = self.u64()? as usize;
            let n = shape.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
            if n.and_then(|n| n.checked_mul(4)) != Some(nbytes) {
                return Err(Error::CorruptCheckpoint(format!("size mismatch for {name}")));
            }
            let data = self.take(nbytes)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4"))).collect();
            out.push(NamedArray { name, shape, data });
        }
        Ok(out)
    }
}
