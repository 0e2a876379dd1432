use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::activation::Activation;
use super::conv::{ConvKind, ConvLayerParams};

/// Shape and role of one layer, before any weights exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: ConvKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub padding: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_size
    }

    pub fn fan_out(&self) -> usize {
        self.out_channels * self.kernel_size
    }

    /// He-uniform for ReLU layers, Xavier-uniform for sigmoid layers.
    pub fn init_bound(&self) -> f64 {
        match self.activation {
            Activation::Relu => (6.0 / self.fan_in() as f64).sqrt(),
            Activation::Sigmoid => (6.0 / (self.fan_in() + self.fan_out()) as f64).sqrt(),
        }
    }
}

/// Uniform weights in `[-bound, bound)`, zero biases.
pub fn init_params(spec: &LayerSpec, rng_seed: u64) -> ConvLayerParams {
    let bound = spec.init_bound();
    let dist = Uniform::new(-bound, bound).expect("bound is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut layer = ConvLayerParams::zeros(
        spec.in_channels,
        spec.out_channels,
        spec.kernel_size,
        spec.padding,
    );
    for w in layer.weights.iter_mut() {
        *w = dist.sample(&mut rng);
    }
    layer
}
