use candle_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Result;

/// History of generated images fed to discriminator updates.
#[derive(Debug)]
pub struct ImagePool {
    capacity: usize,
    buffer: Vec<Tensor>,
    rng: ChaCha8Rng,
}

impl ImagePool {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self { capacity, buffer: Vec::with_capacity(capacity), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Per image: store and return it while filling; once full, return either
    /// the fresh image or (with probability 1/2) a buffered one it replaces.
    pub fn query(&mut self, images: &Tensor) -> Result<Tensor> {
        let images = images.detach();
        if self.capacity == 0 {
            return Ok(images);
        }
        let mut out = Vec::with_capacity(images.dim(0)?);
        for i in 0..images.dim(0)? {
            let img = images.get(i)?;
            if self.buffer.len() < self.capacity {
                self.buffer.push(img.clone());
                out.push(img);
            } else if self.rng.gen_bool(0.5) {
                let j = self.rng.gen_range(0..self.capacity);
                out.push(std::mem::replace(&mut self.buffer[j], img));
            } else {
                out.push(img);
            }
        }
        Ok(Tensor::stack(&out, 0)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn batch(v: f32) -> Tensor {
        Tensor::full(v, (2, 1, 2, 2), &Device::Cpu).unwrap()
    }

    #[test]
    fn fills_then_mixes() {
        let mut pool = ImagePool::new(4, 1);
        for v in [1.0, 2.0] {
            let out = pool.query(&batch(v)).unwrap();
            assert_eq!(out.flatten_all().unwrap().to_vec1::<f32>().unwrap(), vec![v; 8]);
        }
        assert_eq!(pool.len(), 4);
        let mut old = 0;
        for _ in 0..200 {
            let out = pool.query(&batch(9.0)).unwrap();
            assert!(pool.len() <= 4);
            for i in 0..2 {
                if out.get(i).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap()[0] != 9.0 {
                    old += 1;
                }
            }
        }
        // Old images are returned only until flushed out, so the count is small but positive.
        assert!(old > 0 && old <= 4);
    }

    #[test]
    fn zero_capacity_passes_through() {
        let mut pool = ImagePool::new(0, 0);
        let out = pool.query(&batch(3.0)).unwrap();
        assert_eq!(out.dims(), &[2, 1, 2, 2]);
        assert!(pool.is_empty());
    }
}
