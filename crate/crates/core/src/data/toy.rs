//! Ring-of-Gaussians toy distribution.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const TOY_RADIUS: f64 = 2.0;
pub const TOY_SIGMA: f64 = 0.05;
/// Raw coordinates are divided by this to land inside [−1, 1]².
pub const TOY_SCALE: f64 = 2.5;

/// Scaled centers of the `modes` ring components. Mode `k` sits at angle
/// `2πk / modes`.
pub fn mode_centers(modes: usize) -> Vec<[f64; 2]> {
    (0..modes)
        .map(|k| {
            let angle = TAU * k as f64 / modes as f64;
            [TOY_RADIUS * angle.cos() / TOY_SCALE, TOY_RADIUS * angle.sin() / TOY_SCALE]
        })
        .collect()
}

/// `n` points as `[n, 1, 1, 2]` images labelled with their mode. Modes are
/// chosen uniformly; coordinates are clamped to [−1, 1] after scaling.
pub fn make_toy_mixture(n: usize, modes: usize, seed: u64) -> Result<LabeledDataset> {
    if modes < 1 {
        return Err(Error::contract("toy mixture needs at least one mode"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, TOY_SIGMA).expect("positive sigma");
    let centers = mode_centers(modes);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rand::Rng::random_range(&mut rng, 0..modes);
        for c in centers[k] {
            let v = c + noise.sample(&mut rng) / TOY_SCALE;
            data.push(v.clamp(-1.0, 1.0));
        }
        labels.push(k);
    }
    LabeledDataset::new(Tensor::new(&[n, 1, 1, 2], data)?, labels, modes, format!("toy-ring-{modes}"))
}

/// Index of the closest center (first on ties).
pub fn nearest_mode(point: [f64; 2], centers: &[[f64; 2]]) -> usize {
    let dist = |c: &[f64; 2]| (point[0] - c[0]).powi(2) + (point[1] - c[1]).powi(2);
    centers
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, c)| if dist(c) < best.1 { (i, dist(c)) } else { best })
        .0
}

/// How many of `points` (flat `x, y` pairs) fall nearest each center.
pub fn mode_histogram(points: &[f64], centers: &[[f64; 2]]) -> Vec<usize> {
    let mut counts = vec![0; centers.len()];
    for p in points.chunks_exact(2) {
        counts[nearest_mode([p[0], p[1]], centers)] += 1;
    }
    counts
}
