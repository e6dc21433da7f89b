use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::layers::{conv, leaky_relu, sigmoid};
use super::params::{seeded, Init, ParamStore};
use crate::{Error, Result};

const KERNEL: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    /// Number of stride-2 layers; 3 gives the 70x70 receptive field.
    pub strided_layers: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { base_channels: 16, strided_layers: 3 }
    }
}

impl DiscriminatorConfig {
    /// Smallest square input that still leaves a patch map.
    pub fn min_input_size(&self) -> usize {
        1 << (self.strided_layers + 2)
    }

    /// (kernel, stride) per layer, input to output.
    fn layers(&self) -> Vec<(usize, usize)> {
        let mut l = vec![(KERNEL, 2); self.strided_layers];
        l.extend([(KERNEL, 1), (KERNEL, 1)]);
        l
    }

    /// Receptive field of one output unit, in input pixels.
    pub fn receptive_field(&self) -> usize {
        self.layers().iter().rev().fold(1, |rf, &(k, s)| (rf - 1) * s + k)
    }

    /// Input pixel range `[start, end)` along one axis seen by output unit `u`,
    /// before clipping to the image.
    pub fn receptive_span(&self, u: usize) -> (i64, i64) {
        let (mut jump, mut start) = (1i64, 0i64);
        for (k, s) in self.layers() {
            let _ = k;
            start -= jump; // padding of 1 on every layer
            jump *= s as i64;
        }
        let start = start + u as i64 * jump;
        (start, start + self.receptive_field() as i64)
    }
}

/// Fully convolutional patch discriminator with LeakyReLU activations and no
/// normalization, so every score depends only on its own input patch.
#[derive(Debug, Clone)]
pub struct PatchDiscriminator {
    pub config: DiscriminatorConfig,
    pub channels: usize,
    pub params: ParamStore,
}

impl PatchDiscriminator {
    pub fn build(channels: usize, seed: u64, config: &DiscriminatorConfig) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::BadChannelRequest(channels));
        }
        let mut rng = seeded(seed);
        let mut p = ParamStore::new();
        let std = Init::Normal(0.02);
        let mut c_in = channels;
        let mut c_out = config.base_channels;
        let n = config.layers().len();
        for i in 0..n {
            if i == n - 1 {
                c_out = 1;
            }
            p.add(&format!("l{i}.weight"), &[c_out, c_in, KERNEL, KERNEL], std, &mut rng)?;
            p.add(&format!("l{i}.bias"), &[c_out], Init::Zeros, &mut rng)?;
            c_in = c_out;
            c_out = (c_out * 2).min(config.base_channels * 8);
        }
        Ok(Self { config: config.clone(), channels, params: p })
    }

    pub fn with_params(&self, params: ParamStore) -> Self {
        Self { config: self.config.clone(), channels: self.channels, params }
    }

    /// Pre-sigmoid patch scores `(B, 1, h, w)`.
    pub fn forward_logits(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4().map_err(|_| Error::shape("(B, C, H, W)", format!("{:?}", x.dims())))?;
        let min = self.config.min_input_size();
        if c != self.channels || h != w || h < min {
            return Err(Error::shape(format!("(B, {}, S, S) with S >= {min}", self.channels), format!("{:?}", x.dims())));
        }
        let layers = self.config.layers();
        let mut y = x.clone();
        for (i, (_, stride)) in layers.iter().enumerate() {
            y = conv(&y, &self.params, &format!("l{i}"), *stride, 1, true)?;
            if i + 1 < layers.len() {
                y = leaky_relu(&y, 0.2)?;
            }
        }
        Ok(y)
    }

    /// Patch probabilities in (0, 1).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        sigmoid(&self.forward_logits(x)?)
    }
}
