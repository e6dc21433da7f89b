use candle_core::{Tensor, D};
use serde::{Deserialize, Serialize};

use super::layers::{conv, softmax};
use super::params::{seeded, Init, ParamStore};
use crate::dataio::NUM_ZONES;
use crate::{Error, Result};

/// A fire module: 1x1 squeeze followed by parallel 1x1 and 3x3 expands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FireSpec {
    pub squeeze: usize,
    pub expand: usize,
}

/// SqueezeNet-style classifier layout. Each stage starts with a 2x2 max pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub stem_channels: usize,
    pub stages: Vec<Vec<FireSpec>>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let fire = |squeeze, expand| FireSpec { squeeze, expand };
        Self { stem_channels: 16, stages: vec![vec![fire(8, 16), fire(8, 16)], vec![fire(16, 32), fire(16, 32)]] }
    }
}

/// Class activation maps, logits and probabilities for a batch.
#[derive(Debug, Clone)]
pub struct ClassifierOutput {
    /// `(B, 7, h, w)` maps of the 1x1 convolutional head.
    pub cams: Tensor,
    /// `(B, 7)` spatial means of `cams`.
    pub logits: Tensor,
    /// `(B, 7)` softmax of `logits`.
    pub probs: Tensor,
}

/// Gaze classifier whose head is a 1x1 convolution to seven channels followed
/// by global average pooling, so each logit is exactly the mean of its CAM.
#[derive(Debug, Clone)]
pub struct GazeClassifier {
    pub config: ClassifierConfig,
    pub channels: usize,
    pub params: ParamStore,
}

impl GazeClassifier {
    pub fn build(channels: usize, seed: u64, config: &ClassifierConfig) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::BadChannelRequest(channels));
        }
        let mut rng = seeded(seed);
        let mut p = ParamStore::new();
        // He-normal for the ReLU layers; the net has no normalization.
        let he = |fan_in: usize| Init::Normal((2.0 / fan_in as f32).sqrt());
        p.add("stem.weight", &[config.stem_channels, channels, 3, 3], he(channels * 9), &mut rng)?;
        p.add("stem.bias", &[config.stem_channels], Init::Zeros, &mut rng)?;
        let mut c_in = config.stem_channels;
        for (si, stage) in config.stages.iter().enumerate() {
            for (fi, f) in stage.iter().enumerate() {
                let name = format!("fire{si}_{fi}");
                p.add(&format!("{name}.squeeze.weight"), &[f.squeeze, c_in, 1, 1], he(c_in), &mut rng)?;
                p.add(&format!("{name}.squeeze.bias"), &[f.squeeze], Init::Zeros, &mut rng)?;
                p.add(&format!("{name}.expand1.weight"), &[f.expand, f.squeeze, 1, 1], he(f.squeeze), &mut rng)?;
                p.add(&format!("{name}.expand1.bias"), &[f.expand], Init::Zeros, &mut rng)?;
                p.add(&format!("{name}.expand3.weight"), &[f.expand, f.squeeze, 3, 3], he(f.squeeze * 9), &mut rng)?;
                p.add(&format!("{name}.expand3.bias"), &[f.expand], Init::Zeros, &mut rng)?;
                c_in = 2 * f.expand;
            }
        }
        p.add("head.weight", &[NUM_ZONES, c_in, 1, 1], Init::Normal(0.01), &mut rng)?;
        p.add("head.bias", &[NUM_ZONES], Init::Zeros, &mut rng)?;
        Ok(Self { config: config.clone(), channels, params: p })
    }

    pub fn with_params(&self, params: ParamStore) -> Self {
        Self { config: self.config.clone(), channels: self.channels, params }
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    pub fn forward(&self, x: &Tensor) -> Result<ClassifierOutput> {
        let (_, c, h, w) = x.dims4().map_err(|_| Error::shape("(B, C, H, W)", format!("{:?}", x.dims())))?;
        if c != self.channels || h != w || h < 8 {
            return Err(Error::shape(format!("(B, {}, S, S) with S >= 8", self.channels), format!("{:?}", x.dims())));
        }
        let mut h = conv(x, &self.params, "stem", 2, 1, true)?.relu()?;
        for (si, stage) in self.config.stages.iter().enumerate() {
            h = h.max_pool2d(2)?;
            for fi in 0..stage.len() {
                let name = format!("fire{si}_{fi}");
                let s = conv(&h, &self.params, &format!("{name}.squeeze"), 1, 0, true)?.relu()?;
                let e1 = conv(&s, &self.params, &format!("{name}.expand1"), 1, 0, true)?.relu()?;
                let e3 = conv(&s, &self.params, &format!("{name}.expand3"), 1, 1, true)?.relu()?;
                h = Tensor::cat(&[e1, e3], 1)?;
            }
        }
        let cams = conv(&h, &self.params, "head", 1, 0, true)?;
        let logits = cams.flatten_from(2)?.mean(D::Minus1)?;
        let probs = softmax(&logits)?;
        Ok(ClassifierOutput { cams, logits, probs })
    }
}

/// Index of the largest entry per row, ties to the lowest index.
pub fn argmax_rows(t: &Tensor) -> Result<Vec<usize>> {
    let rows = t.to_dtype(candle_core::DType::F64)?.to_vec2::<f64>()?;
    Ok(rows
        .iter()
        .map(|r| {
            let mut best = 0;
            for (i, v) in r.iter().enumerate() {
                if *v > r[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}
