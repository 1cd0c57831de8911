//! Weight initialization.

use rand::Rng;

/// Kaiming-uniform fan-in initialization for ReLU stacks:
/// samples uniformly from `[-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub fn kaiming_uniform(fan_in: usize, len: usize, rng: &mut impl Rng) -> Vec<f32> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt() as f32;
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}
