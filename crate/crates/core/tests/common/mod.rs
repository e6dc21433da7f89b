#![allow(dead_code)]

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn t64(v: Vec<f64>, shape: &[usize]) -> Tensor {
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

pub fn scalar(t: &Tensor) -> f64 {
    t.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Relative error `|a - n| / max(|a|, |n|)` (L2 over all inputs) between the
/// autograd gradient and a central finite difference of step `h`.
pub fn grad_check<F>(inputs: &[(Vec<f64>, Vec<usize>)], h: f64, f: F) -> f64
where
    F: Fn(&[Tensor]) -> Tensor,
{
    let vars: Vec<Var> = inputs.iter().map(|(v, s)| Var::from_tensor(&t64(v.clone(), s)).unwrap()).collect();
    let ts: Vec<Tensor> = vars.iter().map(|v| v.as_tensor().clone()).collect();
    let grads = f(&ts).backward().unwrap();
    let mut analytic = Vec::new();
    for (v, (data, shape)) in vars.iter().zip(inputs) {
        match grads.get(v) {
            Some(g) => analytic.extend(g.flatten_all().unwrap().to_vec1::<f64>().unwrap()),
            None => analytic.extend(std::iter::repeat(0.0).take(data.len())),
        }
        let _ = shape;
    }
    let eval = |k: usize, delta: f64| -> f64 {
        let mut off = 0;
        let ts: Vec<Tensor> = inputs
            .iter()
            .map(|(v, s)| {
                let mut v = v.clone();
                if k >= off && k < off + v.len() {
                    v[k - off] += delta;
                }
                off += v.len();
                t64(v, s)
            })
            .collect();
        scalar(&f(&ts))
    };
    let numeric: Vec<f64> = (0..analytic.len()).map(|k| (eval(k, h) - eval(k, -h)) / (2.0 * h)).collect();
    let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
