use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Normal(f32),
    Zeros,
}

/// A named parameter array in host memory.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Ordered collection of named trainable tensors.
///
/// A frozen store hands out detached tensors, so gradients can flow through
/// the network to its inputs without ever reaching its parameters.
#[derive(Debug, Clone)]
pub struct ParamStore {
    entries: Vec<(String, Var)>,
    frozen: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self { entries: Vec::new(), frozen: false }
    }

    pub(crate) fn add(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut ChaCha8Rng) -> Result<()> {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = match init {
            Init::Normal(sd) => {
                let dist = Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))?;
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            Init::Zeros => vec![0.0; n],
        };
        let var = Var::from_tensor(&Tensor::from_vec(data, shape, &Device::Cpu)?)?;
        self.entries.push((name.to_string(), var));
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let var = self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing parameter {name}")))?;
        Ok(if self.frozen { var.as_tensor().detach() } else { var.as_tensor().clone() })
    }

    pub fn vars(&self) -> Vec<Var> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Deep copy with fresh variables.
    pub fn deep_clone(&self) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(n, v)| Ok((n.clone(), Var::from_tensor(&v.as_tensor().copy()?)?)))
            .collect::<Result<_>>()?;
        Ok(Self { entries, frozen: self.frozen })
    }

    /// View sharing storage with `self` whose tensors are detached from
    /// autograd. Updates to `self` remain visible through the view.
    pub fn detached(&self) -> Self {
        Self { entries: self.entries.clone(), frozen: true }
    }

    /// Deep copy whose tensors are detached from autograd.
    pub fn frozen(&self) -> Result<Self> {
        let mut out = self.deep_clone()?;
        out.frozen = true;
        Ok(out)
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.as_tensor().elem_count()).sum()
    }

    pub fn to_arrays(&self) -> Result<Vec<NamedArray>> {
        self.entries
            .iter()
            .map(|(n, v)| {
                let t = v.as_tensor();
                Ok(NamedArray {
                    name: n.clone(),
                    shape: t.dims().to_vec(),
                    data: t.flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()?,
                })
            })
            .collect()
    }

    /// Rebuilds a store; `expected` fixes names and shapes of the architecture.
    pub fn from_arrays(arrays: &[NamedArray], expected: &ParamStore) -> Result<Self> {
        if arrays.len() != expected.entries.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "expected {} parameter arrays, found {}",
                expected.entries.len(),
                arrays.len()
            )));
        }
        let mut entries = Vec::with_capacity(arrays.len());
        for (a, (name, var)) in arrays.iter().zip(&expected.entries) {
            if &a.name != name || a.shape != var.as_tensor().dims() {
                return Err(Error::CorruptCheckpoint(format!(
                    "parameter {} {:?} does not match architecture {} {:?}",
                    a.name,
                    a.shape,
                    name,
                    var.as_tensor().dims()
                )));
            }
            let t = Tensor::from_vec(a.data.clone(), a.shape.as_slice(), &Device::Cpu)?;
            entries.push((a.name.clone(), Var::from_tensor(&t)?));
        }
        Ok(Self { entries, frozen: expected.frozen })
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for a in self.to_arrays()? {
            h.update(a.name.as_bytes());
            for d in &a.shape {
                h.update((*d as u64).to_le_bytes());
            }
            for v in &a.data {
                h.update(v.to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Multiplies one parameter in place.
    pub fn scale(&self, name: &str, factor: f64) -> Result<()> {
        let (_, var) = self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::Config(format!("no parameter {name}")))?;
        var.set(&var.as_tensor().affine(factor, 0.0)?)?;
        Ok(())
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
