use candle_core::Device;

use super::metrics::{macro_accuracy, ConfusionMatrix};
use crate::dataio::{EyeDataset, NUM_ZONES};
use crate::nets::{GazeClassifier, Generator};
use crate::{Error, Result};

pub(crate) const EVAL_BATCH: usize = 64;

pub(crate) fn check_channels(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ChannelMismatch { expected, got })
    }
}

/// Applies a generator to every image in batches, without gradient tracking.
pub fn translate(generator: &Generator, data: &EyeDataset) -> Result<EyeDataset> {
    check_channels(generator.channels, data.channels)?;
    let g = generator.with_params(generator.params.detached());
    let mut out = data.clone();
    let per = data.channels * data.size * data.size;
    let mut pixels = Vec::with_capacity(data.len() * per);
    for chunk in (0..data.len()).collect::<Vec<_>>().chunks(EVAL_BATCH) {
        let x = data.batch_tensor(chunk, &Device::Cpu)?;
        pixels.extend(g.forward(&x)?.flatten_all()?.to_vec1::<f32>()?);
    }
    out.set_pixels(pixels)?;
    Ok(out)
}

/// Predicted class index per image, optionally after a removal generator.
pub fn predict(classifier: &GazeClassifier, generator: Option<&Generator>, data: &EyeDataset) -> Result<Vec<usize>> {
    Ok(predict_probs(classifier, generator, data)?.iter().map(|p| argmax(p)).collect())
}

/// Class probabilities per image.
pub fn predict_probs(classifier: &GazeClassifier, generator: Option<&Generator>, data: &EyeDataset) -> Result<Vec<[f32; NUM_ZONES]>> {
    check_channels(classifier.channels, data.channels)?;
    let c = classifier.with_params(classifier.params.detached());
    let g = generator.map(|g| g.with_params(g.params.detached()));
    if let Some(g) = &g {
        check_channels(g.channels, data.channels)?;
    }
    let mut out = Vec::with_capacity(data.len());
    for chunk in (0..data.len()).collect::<Vec<_>>().chunks(EVAL_BATCH) {
        let mut x = data.batch_tensor(chunk, &Device::Cpu)?;
        if let Some(g) = &g {
            x = g.forward(&x)?;
        }
        let probs = c.forward(&x)?.probs.to_vec2::<f32>()?;
        out.extend(probs.into_iter().map(|r| {
            let mut a = [0f32; NUM_ZONES];
            a.copy_from_slice(&r);
            a
        }));
    }
    Ok(out)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn confusion_for(preds: &[usize], data: &EyeDataset) -> Result<ConfusionMatrix> {
    let labels: Vec<usize> = data.zones.iter().map(|z| z.code()).collect();
    ConfusionMatrix::from_indices(NUM_ZONES, preds, &labels)
}

/// Macro accuracy of `classifier` (after `generator`, if any) on `data`.
pub fn macro_on(classifier: &GazeClassifier, generator: Option<&Generator>, data: &EyeDataset) -> Result<f64> {
    let preds = predict(classifier, generator, data)?;
    macro_accuracy(&confusion_for(&preds, data)?)
}
