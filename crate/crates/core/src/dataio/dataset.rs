//! In-memory preprocessed datasets.

use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};

use super::manifest::SampleRecord;
use super::preprocess::{crop_eye_region, equalize_adaptive_with, to_model_input_sized, ClaheParams, EyePixels, Raster};
use super::synth::SynthSample;
use super::zone::{CaptureCondition, ConditionSet, Domain, GazeZone};
use crate::{Error, Result};

/// How raw images become model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub image_size: usize,
    pub channels: usize,
    pub equalize: bool,
    pub clahe: ClaheParams,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { image_size: super::preprocess::MODEL_INPUT_SIZE, channels: 1, equalize: true, clahe: ClaheParams::default() }
    }
}

/// Crop (when landmarks are given), equalize, resize and normalize.
pub fn prepare(raster: &Raster, landmarks: Option<&[(f32, f32)]>, cfg: &PreprocessConfig) -> Result<EyePixels> {
    let cropped;
    let mut img = raster;
    if let Some(points) = landmarks {
        cropped = crop_eye_region(raster, points)?;
        img = &cropped;
    }
    if cfg.equalize {
        let eq = equalize_adaptive_with(img, cfg.clahe)?;
        to_model_input_sized(&eq, cfg.channels, cfg.image_size)
    } else {
        to_model_input_sized(img, cfg.channels, cfg.image_size)
    }
}

/// Preprocessed images stored contiguously (N x C x S x S) with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeDataset {
    pub size: usize,
    pub channels: usize,
    data: Vec<f32>,
    pub zones: Vec<GazeZone>,
    pub conditions: Vec<CaptureCondition>,
    pub subjects: Vec<String>,
    /// Ground-truth pupil centre in 256-pixel canvas coordinates, when known.
    pub pupils: Vec<Option<(f32, f32)>>,
}

impl EyeDataset {
    pub fn new(size: usize, channels: usize) -> Self {
        Self {
            size,
            channels,
            data: Vec::new(),
            zones: Vec::new(),
            conditions: Vec::new(),
            subjects: Vec::new(),
            pupils: Vec::new(),
        }
    }

    pub fn push(&mut self, px: &EyePixels, zone: GazeZone, condition: CaptureCondition, subject: &str, pupil: Option<(f32, f32)>) -> Result<()> {
        if px.size != self.size || px.channels != self.channels {
            return Err(Error::shape(
                format!("{}x{}x{}", self.channels, self.size, self.size),
                format!("{}x{}x{}", px.channels, px.size, px.size),
            ));
        }
        self.data.extend_from_slice(&px.data);
        self.zones.push(zone);
        self.conditions.push(condition);
        self.subjects.push(subject.to_string());
        self.pupils.push(pupil);
        Ok(())
    }

    pub fn from_records(records: &[SampleRecord], cfg: &PreprocessConfig) -> Result<Self> {
        let mut ds = Self::new(cfg.image_size, cfg.channels);
        for r in records {
            let raster = Raster::open(&r.image_path)?;
            let px = prepare(&raster, r.landmarks.as_deref(), cfg)?;
            ds.push(&px, r.zone, r.condition, &r.subject_id, None)?;
        }
        Ok(ds)
    }

    pub fn from_synth(samples: &[SynthSample], cfg: &PreprocessConfig) -> Result<Self> {
        let mut ds = Self::new(cfg.image_size, cfg.channels);
        for s in samples {
            let px = prepare(&Raster::from_gray8(&s.image), None, cfg)?;
            ds.push(&px, s.zone, s.condition, &s.subject_id, Some(s.pupil_center))?;
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    fn item_len(&self) -> usize {
        self.channels * self.size * self.size
    }

    pub fn pixels(&self, i: usize) -> EyePixels {
        let n = self.item_len();
        EyePixels { size: self.size, channels: self.channels, data: self.data[i * n..(i + 1) * n].to_vec() }
    }

    pub fn domain_of(&self, i: usize) -> Domain {
        self.conditions[i].eyewear.domain()
    }

    /// Stacks the selected items into a `(B, C, S, S)` tensor.
    pub fn batch_tensor(&self, idx: &[usize], device: &Device) -> Result<Tensor> {
        let n = self.item_len();
        let mut buf = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            buf.extend_from_slice(&self.data[i * n..(i + 1) * n]);
        }
        Ok(Tensor::from_vec(buf, (idx.len(), self.channels, self.size, self.size), device)?)
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<GazeZone> {
        idx.iter().map(|&i| self.zones[i]).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let n = self.item_len();
        let mut out = Self::new(self.size, self.channels);
        for &i in idx {
            out.data.extend_from_slice(&self.data[i * n..(i + 1) * n]);
            out.zones.push(self.zones[i]);
            out.conditions.push(self.conditions[i]);
            out.subjects.push(self.subjects[i].clone());
            out.pupils.push(self.pupils[i]);
        }
        out
    }

    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.subset(&idx)
    }

    pub fn domain(&self, domain: Domain) -> Self {
        self.filter(|i| self.domain_of(i) == domain)
    }

    pub fn condition_set(&self, set: ConditionSet) -> Self {
        self.filter(|i| set.contains(self.conditions[i]))
    }

    /// Replaces all pixel data, keeping labels and metadata.
    pub fn set_pixels(&mut self, data: Vec<f32>) -> Result<()> {
        if data.len() != self.data.len() {
            return Err(Error::shape(self.data.len().to_string(), data.len().to_string()));
        }
        self.data = data;
        Ok(())
    }

    /// Concatenates two datasets with identical geometry.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.size != self.size || other.channels != self.channels {
            return Err(Error::ChannelMismatch { expected: self.channels, got: other.channels });
        }
        let mut out = self.clone();
        out.data.extend_from_slice(&other.data);
        out.zones.extend_from_slice(&other.zones);
        out.conditions.extend_from_slice(&other.conditions);
        out.subjects.extend(other.subjects.iter().cloned());
        out.pupils.extend_from_slice(&other.pupils);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synth::{generate_split, SynthSplitPlan, SyntheticSpec};
    use crate::dataio::zone::Eyewear;

    #[test]
    fn synthetic_split_loads_and_filters() {
        let spec = SyntheticSpec::default();
        let plan = SynthSplitPlan { subjects: 1, per_zone: 1, subjects_with_glasses: 1 };
        let samples = generate_split(&spec, &plan, &CaptureCondition::ALL, "t", 2).unwrap();
        let cfg = PreprocessConfig { image_size: 32, ..Default::default() };
        let ds = EyeDataset::from_synth(&samples, &cfg).unwrap();
        assert_eq!(ds.len(), 28);
        assert_eq!(ds.domain(Domain::Y).len(), 14);
        assert!(ds.domain(Domain::Y).conditions.iter().all(|c| c.eyewear == Eyewear::WithGlasses));
        assert_eq!(ds.condition_set(ConditionSet::DayNoGlasses).len(), 7);
        let t = ds.batch_tensor(&[0, 3, 5], &Device::Cpu).unwrap();
        assert_eq!(t.dims(), &[3, 1, 32, 32]);
        assert!(ds.pixels(0).data.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
