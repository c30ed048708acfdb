use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;

/// Glorot-uniform `[fan_in, fan_out]` weight matrix.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data")
}

pub fn normal(shape: Vec<usize>, std: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("std is finite and non-negative");
    let n = shape.iter().product();
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, data).expect("shape matches data")
}
