use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::rng::{indexed_seed, StreamRng};
use crate::{Error, Result};

/// One epoch's batching of `0..len`: a seeded permutation cut into
/// consecutive chunks, the last one possibly short.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batches {
    order: Vec<usize>,
    batch_size: usize,
}

impl Batches {
    pub fn iter(&self) -> core::slice::Chunks<'_, usize> {
        self.order.chunks(self.batch_size)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// The permutation depends only on `(shuffle_seed, epoch)`.
pub fn batch_iter(len: usize, batch_size: usize, shuffle_seed: u64, epoch: u64) -> Result<Batches> {
    if batch_size < 2 {
        return Err(Error::Config(alloc::format!("batch size {batch_size} must be at least 2")));
    }
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = StreamRng::seed_from_u64(indexed_seed(shuffle_seed, epoch));
    order.shuffle(&mut rng);
    Ok(Batches { order, batch_size })
}
