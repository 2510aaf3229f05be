//! Seeded randomness shared by the training loops.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Data = 1,
    Noise = 2,
}

pub fn rng_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// `[n, noise_dim]` i.i.d. standard normal entries.
pub fn sample_noise(noise_dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::randn(&[n, noise_dim], 0.0, 1.0, rng)
}

/// Yields full mini-batches of shuffled indices, reshuffling whenever fewer
/// than a batch remain in the current pass.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(len: usize, batch: usize, rng: ChaCha8Rng) -> Result<Self> {
        if batch == 0 || batch > len {
            return Err(Error::contract(format!("batch size {batch} does not fit a dataset of {len}")));
        }
        Ok(BatchSampler { order: (0..len).collect(), cursor: len, batch, rng })
    }

    /// Full batches per pass over the data.
    pub fn batches_per_pass(&self) -> usize {
        self.order.len() / self.batch
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor + self.batch > self.order.len() {
            self.order.sort_unstable();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_deterministic_and_empty_when_asked() {
        let a = sample_noise(8, 5, &mut rng_stream(3, Stream::Noise));
        let b = sample_noise(8, 5, &mut rng_stream(3, Stream::Noise));
        assert_eq!(a, b);
        assert_eq!(sample_noise(8, 0, &mut rng_stream(3, Stream::Noise)).shape(), &[0, 8]);
    }

    #[test]
    fn noise_has_unit_moments() {
        let z = sample_noise(8, 10_000, &mut rng_stream(7, Stream::Noise));
        for c in 0..8 {
            let col: Vec<f64> = z.data().iter().skip(c).step_by(8).copied().collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 0.05, "{mean}");
            assert!((var - 1.0).abs() < 0.05, "{var}");
        }
    }

    #[test]
    fn each_pass_visits_every_index_once() {
        let mut s = BatchSampler::new(10, 5, rng_stream(1, Stream::Data)).unwrap();
        let mut seen: Vec<usize> = (0..2).flat_map(|_| s.next_batch()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert!(BatchSampler::new(3, 4, rng_stream(1, Stream::Data)).is_err());
    }
}
