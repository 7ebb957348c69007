//! Seeded weight initialization: uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].

use super::Tensor;
use crate::rng::Rng;

pub fn uniform_fan_in(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(-bound, bound)).collect())
}
