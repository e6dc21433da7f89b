//! Loss terms for classifier training and the gaze-preserving CycleGAN.
//!
//! Every function is a pure tensor expression, so gradients come from autograd
//! and the same code runs in `f32` for training and `f64` for gradient checks.
//! L1 terms use per-pixel mean reduction. Batched inputs are averaged over the
//! batch.

use candle_core::{DType, Tensor, D};
use serde::{Deserialize, Serialize};

use crate::dataio::NUM_ZONES;
use crate::nets::{log_softmax, sigmoid};
use crate::{Error, Result};

/// Lower clamp for probabilities inside cross-entropy logs.
pub const CE_CLAMP: f64 = 1e-12;
/// Clamp for discriminator scores inside adversarial logs.
pub const ADV_CLAMP: f64 = 1e-7;
/// Offset that keeps the square root differentiable at zero.
const NORM_EPS: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Cycle consistency.
    pub lambda1: f64,
    /// Identity.
    pub lambda2: f64,
    /// Gaze consistency.
    pub lambda3: f64,
    /// CAM sigmoid temperature.
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 10.0, lambda2: 5.0, lambda3: 1.0, tau: 0.01 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.lambda1, self.lambda2, self.lambda3].iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.tau.is_finite()
            && self.tau > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("loss weights must be non-negative and tau positive, got {self:?}")))
        }
    }
}

/// Component losses of one batch, each a scalar tensor.
#[derive(Debug, Clone)]
pub struct LossParts {
    pub adversarial: Tensor,
    pub cycle: Tensor,
    pub identity: Tensor,
    pub gaze: Option<Tensor>,
}

/// `(B, 7)` one-hot encoding of class indices.
pub fn one_hot(labels: &[usize], dtype: DType, device: &candle_core::Device) -> Result<Tensor> {
    let mut data = vec![0f64; labels.len() * NUM_ZONES];
    for (i, &l) in labels.iter().enumerate() {
        if l >= NUM_ZONES {
            return Err(Error::UnknownZoneCode(l as i64));
        }
        data[i * NUM_ZONES + l] = 1.0;
    }
    Ok(Tensor::from_vec(data, (labels.len(), NUM_ZONES), device)?.to_dtype(dtype)?)
}

fn check_rows(t: &Tensor, labels: &[usize]) -> Result<()> {
    match t.dims() {
        [b, n] if *b == labels.len() && *n == NUM_ZONES => Ok(()),
        d => Err(Error::shape(format!("({}, {NUM_ZONES})", labels.len()), format!("{d:?}"))),
    }
}

/// Per-sample `-log p_true`, clamped at [`CE_CLAMP`].
pub fn cross_entropy_per_sample(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    check_rows(probs, labels)?;
    let z = one_hot(labels, probs.dtype(), probs.device())?;
    let logp = probs.clamp(CE_CLAMP, 1.0)?.log()?;
    Ok((z * logp)?.sum(D::Minus1)?.neg()?)
}

/// Batch-mean cross-entropy of probabilities against class indices.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    Ok(cross_entropy_per_sample(probs, labels)?.mean_all()?)
}

/// Cross-entropy computed from logits through a log-softmax.
pub fn cross_entropy_logits(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    Ok(ce_logits_per_sample(logits, labels)?.mean_all()?)
}

fn ce_logits_per_sample(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    check_rows(logits, labels)?;
    let z = one_hot(labels, logits.dtype(), logits.device())?;
    Ok((z * log_softmax(logits)?)?.sum(D::Minus1)?.neg()?)
}

/// 1 where the row argmax (ties to the lowest index) equals the label.
pub fn correct_mask(scores: &Tensor, labels: &[usize]) -> Result<Vec<bool>> {
    let pred = crate::nets::argmax_rows(scores)?;
    Ok(pred.iter().zip(labels).map(|(p, l)| p == l).collect())
}

fn gate(per_sample: Tensor, mask: &[bool]) -> Result<Tensor> {
    let m: Vec<f64> = mask.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    let m = Tensor::from_vec(m, mask.len(), per_sample.device())?.to_dtype(per_sample.dtype())?;
    Ok((per_sample * m)?.mean_all()?)
}

/// Cross-entropy counted only for correctly classified samples. Wrong samples
/// contribute zero value and zero gradient; the mean still divides by the
/// full batch size.
pub fn selective_cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let mask = correct_mask(probs, labels)?;
    gate(cross_entropy_per_sample(probs, labels)?, &mask)
}

pub fn selective_cross_entropy_logits(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let mask = correct_mask(logits, labels)?;
    gate(ce_logits_per_sample(logits, labels)?, &mask)
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(Error::shape(format!("{:?}", a.dims()), format!("{:?}", b.dims())))
    }
}

/// Mean absolute difference.
pub fn l1_mean(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b)?;
    Ok((a - b)?.abs()?.mean_all()?)
}

/// `mean|x_rec - x| + mean|y_rec - y|`.
pub fn cycle_consistency(x: &Tensor, x_rec: &Tensor, y: &Tensor, y_rec: &Tensor) -> Result<Tensor> {
    Ok((l1_mean(x_rec, x)? + l1_mean(y_rec, y)?)?)
}

/// `mean|G_wg(y) - y| + mean|G_ng(x) - x|`.
pub fn identity(y: &Tensor, g_wg_of_y: &Tensor, x: &Tensor, g_ng_of_x: &Tensor) -> Result<Tensor> {
    Ok((l1_mean(g_wg_of_y, y)? + l1_mean(g_ng_of_x, x)?)?)
}

fn check_scores(t: &Tensor) -> Result<()> {
    let v = t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    match v.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        Some(bad) => Err(Error::DomainError(*bad)),
        None => Ok(()),
    }
}

fn mean_log(t: &Tensor) -> Result<Tensor> {
    Ok(t.clamp(ADV_CLAMP, 1.0 - ADV_CLAMP)?.log()?.mean_all()?)
}

fn mean_log1m(t: &Tensor) -> Result<Tensor> {
    Ok(t.clamp(ADV_CLAMP, 1.0 - ADV_CLAMP)?.affine(-1.0, 1.0)?.log()?.mean_all()?)
}

/// The two-discriminator log-likelihood objective on probability maps:
/// `E log D_wg(Y) + E log(1 - D_wg(G_wg(X))) + E log D_ng(X) + E log(1 - D_ng(G_ng(Y)))`.
///
/// Discriminators ascend this value. Scores outside `[0, 1]` (or NaN) are a
/// [`Error::DomainError`].
pub fn adversarial(d_real_wg: &Tensor, d_fake_wg: &Tensor, d_real_ng: &Tensor, d_fake_ng: &Tensor) -> Result<Tensor> {
    for t in [d_real_wg, d_fake_wg, d_real_ng, d_fake_ng] {
        check_scores(t)?;
    }
    let wg = (mean_log(d_real_wg)? + mean_log1m(d_fake_wg)?)?;
    let ng = (mean_log(d_real_ng)? + mean_log1m(d_fake_ng)?)?;
    Ok((wg + ng)?)
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: &Tensor) -> Result<Tensor> {
    Ok((x.relu()? + x.abs()?.neg()?.exp()?.affine(1.0, 1.0)?.log()?)?)
}

/// Loss one discriminator minimizes: `-(E log D(real) + E log(1 - D(fake)))`,
/// computed from pre-sigmoid logits.
pub fn discriminator_loss_logits(real_logits: &Tensor, fake_logits: &Tensor) -> Result<Tensor> {
    Ok((softplus(&real_logits.neg()?)?.mean_all()? + softplus(fake_logits)?.mean_all()?)?)
}

/// Non-saturating generator surrogate `-E log D(fake)` from logits.
pub fn generator_adversarial_logits(fake_logits: &Tensor) -> Result<Tensor> {
    Ok(softplus(&fake_logits.neg()?)?.mean_all()?)
}

/// Least-squares discriminator loss on raw outputs.
pub fn discriminator_loss_ls(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    Ok(((real.affine(1.0, -1.0)?.sqr()?.mean_all()? + fake.sqr()?.mean_all()?)? * 0.5)?)
}

/// Least-squares generator loss on raw outputs.
pub fn generator_adversarial_ls(fake: &Tensor) -> Result<Tensor> {
    Ok(fake.affine(1.0, -1.0)?.sqr()?.mean_all()?)
}

/// Elementwise `1 / (1 + exp(-tau * A))`.
pub fn cam_transform(cams: &Tensor, tau: f64) -> Result<Tensor> {
    sigmoid(&cams.affine(tau, 0.0)?)
}

/// Mean over classes of the Frobenius distance between sigmoid-transformed
/// CAMs. Accepts `(N, h, w)` or batched `(B, N, h, w)`; batches are averaged.
pub fn gaze_consistency(cams_real: &Tensor, cams_rec: &Tensor, tau: f64) -> Result<Tensor> {
    let (a, b) = match (cams_real.rank(), cams_rec.rank()) {
        (3, 3) => (cams_real.unsqueeze(0)?, cams_rec.unsqueeze(0)?),
        (4, 4) => (cams_real.clone(), cams_rec.clone()),
        _ => return Err(Error::shape("(N, h, w) or (B, N, h, w)", format!("{:?} vs {:?}", cams_real.dims(), cams_rec.dims()))),
    };
    let (ba, na, ha, wa) = a.dims4()?;
    let (bb, nb, hb, wb) = b.dims4()?;
    if na != nb {
        return Err(Error::NMismatch(na, nb));
    }
    if (ba, ha, wa) != (bb, hb, wb) {
        return Err(Error::shape(format!("{:?}", a.dims()), format!("{:?}", b.dims())));
    }
    let diff = (cam_transform(&a, tau)? - cam_transform(&b, tau)?)?;
    let sq = diff.sqr()?.flatten_from(2)?.sum(D::Minus1)?;
    let norms = sq.affine(1.0, NORM_EPS)?.sqrt()?.affine(1.0, -NORM_EPS.sqrt())?;
    Ok(norms.mean_all()?)
}

/// `L_adv + lambda1 * L_cyc + lambda2 * L_id`.
pub fn total_cyclegan(parts: &LossParts, w: &LossWeights) -> Result<Tensor> {
    let cyc = parts.cycle.affine(w.lambda1, 0.0)?;
    let idt = parts.identity.affine(w.lambda2, 0.0)?;
    Ok(((&parts.adversarial + cyc)? + idt)?)
}

/// [`total_cyclegan`] plus `lambda3 * L_gaze`. A missing gaze term counts as 0.
pub fn total_gpcyclegan(parts: &LossParts, w: &LossWeights) -> Result<Tensor> {
    let base = total_cyclegan(parts, w)?;
    match &parts.gaze {
        Some(g) => Ok((base + g.affine(w.lambda3, 0.0)?)?),
        None => Ok(base),
    }
}
