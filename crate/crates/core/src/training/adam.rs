use std::collections::HashMap;

use candle_core::backprop::GradStore;
use candle_core::{Device, Tensor, Var};

use crate::nets::{NamedArray, ParamStore};
use crate::{Error, Result};

/// Adam with bias correction over the parameters of one [`ParamStore`].
#[derive(Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    names: Vec<String>,
    vars: Vec<Var>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64, betas: (f64, f64)) -> Result<Self> {
        let vars = params.vars();
        let zeros = |v: &Var| v.as_tensor().zeros_like();
        Ok(Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            step: 0,
            names: params.names().map(String::from).collect(),
            m: vars.iter().map(zeros).collect::<candle_core::Result<_>>()?,
            v: vars.iter().map(zeros).collect::<candle_core::Result<_>>()?,
            vars,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update; parameters without a gradient are left untouched.
    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..self.vars.len() {
            let Some(g) = grads.get(self.vars[i].as_tensor()) else { continue };
            // Gradients still reference the graph; keep only their values.
            let g = g.detach();
            self.m[i] = ((&self.m[i] * self.beta1)? + (&g * (1.0 - self.beta1))?)?.detach();
            self.v[i] = ((&self.v[i] * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?.detach();
            let m_hat = (&self.m[i] / c1)?;
            let v_hat = (&self.v[i] / c2)?;
            let update = (m_hat / (v_hat.sqrt()? + self.eps)?)?;
            let next = (self.vars[i].as_tensor().detach() - (update * self.lr)?)?;
            self.vars[i].set(&next)?;
        }
        Ok(())
    }

    /// Moment estimates as named arrays (`m.<param>`, `v.<param>`).
    pub fn state(&self) -> Result<Vec<NamedArray>> {
        let mut out = Vec::with_capacity(2 * self.names.len());
        for (prefix, moments) in [("m", &self.m), ("v", &self.v)] {
            for (name, t) in self.names.iter().zip(moments) {
                out.push(NamedArray {
                    name: format!("{prefix}.{name}"),
                    shape: t.dims().to_vec(),
                    data: t.flatten_all()?.to_vec1::<f32>()?,
                });
            }
        }
        Ok(out)
    }

    pub fn load_state(&mut self, arrays: &[NamedArray], step: u64) -> Result<()> {
        let by_name: HashMap<&str, &NamedArray> = arrays.iter().map(|a| (a.name.as_str(), a)).collect();
        for (prefix, moments) in [("m", &mut self.m), ("v", &mut self.v)] {
            for (name, t) in self.names.iter().zip(moments.iter_mut()) {
                let key = format!("{prefix}.{name}");
                let a = by_name
                    .get(key.as_str())
                    .ok_or_else(|| Error::CorruptCheckpoint(format!("missing optimizer state {key}")))?;
                if a.shape != t.dims() {
                    return Err(Error::CorruptCheckpoint(format!("optimizer state {key} has shape {:?}", a.shape)));
                }
                *t = Tensor::from_vec(a.data.clone(), a.shape.as_slice(), &Device::Cpu)?;
            }
        }
        self.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{GazeClassifier, ClassifierConfig};

    #[test]
    fn first_step_moves_each_weight_by_lr() {
        let clf = GazeClassifier::build(1, 0, &ClassifierConfig::default()).unwrap();
        let mut adam = Adam::new(&clf.params, 0.01, (0.9, 0.999)).unwrap();
        let before = clf.params.tensor("head.bias").unwrap().to_vec1::<f32>().unwrap();
        let x = Tensor::ones((1, 1, 16, 16), candle_core::DType::F32, &Device::Cpu).unwrap();
        let out = clf.forward(&x).unwrap();
        let loss = out.logits.sum_all().unwrap();
        adam.step(&loss.backward().unwrap()).unwrap();
        let after = clf.params.tensor("head.bias").unwrap().to_vec1::<f32>().unwrap();
        // d(sum logits)/d bias = 1 > 0, so each bias drops by ~lr
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b - 0.01).abs() < 1e-5, "{a} {b}");
        }
        let state = adam.state().unwrap();
        let mut other = Adam::new(&clf.params, 0.01, (0.9, 0.999)).unwrap();
        other.load_state(&state, adam.steps()).unwrap();
        assert_eq!(other.state().unwrap(), state);
    }
}
