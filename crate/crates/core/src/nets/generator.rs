use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::layers::{conv, instance_norm};
use super::params::{seeded, Init, ParamStore};
use crate::{Error, Result};

/// Largest magnitude a generator can emit; keeps outputs strictly inside (-1, 1).
pub const OUTPUT_BOUND: f64 = 1.0 - 1.0 / 4096.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub base_channels: usize,
    pub res_blocks: usize,
    pub downsamplings: usize,
    /// Odd kernel size of the first and last convolutions.
    pub outer_kernel: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { base_channels: 16, res_blocks: 9, downsamplings: 2, outer_kernel: 7 }
    }
}

/// Encoder, residual trunk and decoder with instance normalization and a
/// bounded tanh output. Upsampling is nearest-neighbour followed by a 3x3 conv.
#[derive(Debug, Clone)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub channels: usize,
    pub params: ParamStore,
}

impl Generator {
    pub fn build(channels: usize, seed: u64, config: &GeneratorConfig) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::BadChannelRequest(channels));
        }
        let k = config.outer_kernel;
        if k % 2 == 0 {
            return Err(Error::Config(format!("generator outer_kernel must be odd, got {k}")));
        }
        let mut rng = seeded(seed);
        let mut p = ParamStore::new();
        let std = Init::Normal(0.02);
        let base = config.base_channels;
        p.add("enc0.weight", &[base, channels, k, k], std, &mut rng)?;
        let mut c = base;
        for i in 0..config.downsamplings {
            p.add(&format!("down{i}.weight"), &[c * 2, c, 3, 3], std, &mut rng)?;
            c *= 2;
        }
        for r in 0..config.res_blocks {
            p.add(&format!("res{r}.a.weight"), &[c, c, 3, 3], std, &mut rng)?;
            p.add(&format!("res{r}.b.weight"), &[c, c, 3, 3], std, &mut rng)?;
        }
        for i in 0..config.downsamplings {
            p.add(&format!("up{i}.weight"), &[c / 2, c, 3, 3], std, &mut rng)?;
            c /= 2;
        }
        p.add("out.weight", &[channels, c, k, k], std, &mut rng)?;
        p.add("out.bias", &[channels], Init::Zeros, &mut rng)?;
        Ok(Self { config: config.clone(), channels, params: p })
    }

    pub fn with_params(&self, params: ParamStore) -> Self {
        Self { config: self.config.clone(), channels: self.channels, params }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4().map_err(|_| Error::shape("(B, C, H, W)", format!("{:?}", x.dims())))?;
        if c != self.channels || h != w || h < (1 << self.config.downsamplings) {
            return Err(Error::shape(format!("(B, {}, S, S)", self.channels), format!("{:?}", x.dims())));
        }
        let p = &self.params;
        let pad = self.config.outer_kernel / 2;
        let mut y = instance_norm(&conv(x, p, "enc0", 1, pad, false)?)?.relu()?;
        let mut sizes = Vec::with_capacity(self.config.downsamplings);
        for i in 0..self.config.downsamplings {
            sizes.push((y.dim(2)?, y.dim(3)?));
            y = instance_norm(&conv(&y, p, &format!("down{i}"), 2, 1, false)?)?.relu()?;
        }
        for r in 0..self.config.res_blocks {
            let t = instance_norm(&conv(&y, p, &format!("res{r}.a"), 1, 1, false)?)?.relu()?;
            let t = instance_norm(&conv(&t, p, &format!("res{r}.b"), 1, 1, false)?)?;
            y = (y + t)?;
        }
        for i in 0..self.config.downsamplings {
            let (th, tw) = sizes[self.config.downsamplings - 1 - i];
            y = upsample2(&y, th, tw)?;
            y = instance_norm(&conv(&y, p, &format!("up{i}"), 1, 1, false)?)?.relu()?;
        }
        Ok(conv(&y, p, "out", 1, pad, true)?.tanh()?.affine(OUTPUT_BOUND, 0.0)?)
    }
}

/// Nearest-neighbour 2x upsampling cropped to `(th, tw)`.
fn upsample2(x: &Tensor, th: usize, tw: usize) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let y = x.reshape((b, c, h, 1, w, 1))?.broadcast_as((b, c, h, 2, w, 2))?.reshape((b, c, 2 * h, 2 * w))?;
    Ok(y.narrow(2, 0, th)?.narrow(3, 0, tw)?)
}
