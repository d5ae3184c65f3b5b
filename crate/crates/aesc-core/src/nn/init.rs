//! Seeded fan-in scaled uniform weight initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::nn::LayerSpec;
use crate::tensor::Tensor;

/// Draws weights from `U(-sqrt(6/fan_in), sqrt(6/fan_in))` and biases from
/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, deterministically per seed.
pub fn init_layer_params(spec: &LayerSpec, seed: u64) -> (Tensor<f32>, Tensor<f32>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let fan_in = spec.fan_in().max(1) as f64;
    let wb = (6.0 / fan_in).sqrt() as f32;
    let bb = (1.0 / fan_in.sqrt()) as f32;
    let wshape = spec.weight_shape();
    let n: usize = wshape.iter().product();
    let weights = Tensor::new(wshape, (0..n).map(|_| rng.random_range(-wb..wb)).collect());
    let bias = Tensor::new(
        spec.bias_shape(),
        (0..spec.out_channels).map(|_| rng.random_range(-bb..bb)).collect(),
    );
    (weights, bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    #[test]
    fn same_seed_same_values() {
        let spec = LayerSpec::conv2d(3, 8, (3, 3), (1, 1), (1, 1), Activation::Relu);
        let (w1, b1) = init_layer_params(&spec, 42);
        let (w2, b2) = init_layer_params(&spec, 42);
        assert_eq!(w1, w2);
        assert_eq!(b1, b2);
        let (w3, _) = init_layer_params(&spec, 43);
        assert_ne!(w1, w3);
    }

    #[test]
    fn bounds_respect_fan_in() {
        let spec = LayerSpec::linear(64, 40, Activation::Relu);
        let (w, _) = init_layer_params(&spec, 7);
        let bound = (6.0f32 / 64.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() < bound));
    }
}
