use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Shuffled mini-batches over a slice. The order is a pure function of the
/// seed; the final short batch is emitted.
#[derive(Debug, Clone)]
pub struct BatchIter<T> {
    items: Vec<T>,
    batch_size: usize,
    pos: usize,
}

impl<T: Clone> Iterator for BatchIter<T> {
    type Item = Vec<T>;

    fn next(&mut self) -> Option<Vec<T>> {
        if self.pos >= self.items.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.items.len());
        let batch = self.items[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}

pub fn batch_iter<T: Clone>(records: &[T], batch_size: usize, shuffle_seed: u64) -> Result<BatchIter<T>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut items = records.to_vec();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    Ok(BatchIter { items, batch_size, pos: 0 })
}

/// Index batches for `n` items.
pub fn index_batches(n: usize, batch_size: usize, shuffle_seed: u64) -> Result<Vec<Vec<usize>>> {
    let idx: Vec<usize> = (0..n).collect();
    Ok(batch_iter(&idx, batch_size, shuffle_seed)?.collect())
}
