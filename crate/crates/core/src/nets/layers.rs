use candle_core::{Tensor, D};

use super::params::ParamStore;
use crate::Result;

pub(crate) fn conv(x: &Tensor, p: &ParamStore, name: &str, stride: usize, pad: usize, bias: bool) -> Result<Tensor> {
    let w = p.tensor(&format!("{name}.weight"))?;
    let y = super::im2col::conv2d(x, &w, stride, pad)?;
    if !bias {
        return Ok(y);
    }
    let b = p.tensor(&format!("{name}.bias"))?;
    let c = b.dim(0)?;
    Ok(y.broadcast_add(&b.reshape((1, c, 1, 1))?)?)
}

/// Per-sample, per-channel normalization over spatial positions (no affine).
pub(crate) fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let flat = x.reshape((b, c, h * w))?;
    let mean = flat.mean_keepdim(D::Minus1)?;
    let centred = flat.broadcast_sub(&mean)?;
    let var = centred.sqr()?.mean_keepdim(D::Minus1)?;
    let y = centred.broadcast_div(&(var + 1e-5)?.sqrt()?)?;
    Ok(y.reshape((b, c, h, w))?)
}

pub(crate) fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok((x.relu()? - x.neg()?.relu()?.affine(slope, 0.0)?)?)
}

/// Logistic function written via tanh, which stays finite for any input.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(x.affine(0.5, 0.0)?.tanh()?.affine(0.5, 0.5)?)
}

pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let max = logits.max_keepdim(D::Minus1)?.detach();
    let e = logits.broadcast_sub(&max)?.exp()?;
    Ok(e.broadcast_div(&e.sum_keepdim(D::Minus1)?)?)
}

pub fn log_softmax(logits: &Tensor) -> Result<Tensor> {
    let max = logits.max_keepdim(D::Minus1)?.detach();
    let shifted = logits.broadcast_sub(&max)?;
    let lse = shifted.exp()?.sum_keepdim(D::Minus1)?.log()?;
    Ok(shifted.broadcast_sub(&lse)?)
}
