//! The three-layer convolutional encoder and its mirrored transposed
//! convolution decoder.
//!
//! With the default configuration the signal lengths through the network
//! are `288 -> 179 -> 125 -> 76 -> 125 -> 179 -> 288`, with 8 channels at
//! every hidden stage and 18,448 trainable parameters.

mod weights;

pub use weights::{load_weights, save_weights, WEIGHT_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::conv::{conv1d_backward_accumulate, conv_transpose1d_backward_accumulate};
use crate::nn::{
    adam_step, conv1d_forward, conv_transpose1d_forward, dropout_apply, dropout_backward,
    init_params, Activation, AdamConfig, AdamState, ConvKind, ConvLayerParams, DropoutMask,
    FeatureMap, LayerSpec,
};
use crate::seed::mix_seed;

/// Samples per input/output window (9.6 s at 30 Hz).
pub const WINDOW_LEN: usize = 288;
pub const NUM_LAYERS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub window: usize,
    pub channels: usize,
    pub encoder_kernels: [usize; 3],
    pub encoder_paddings: [usize; 3],
    pub encoder_activations: [Activation; 3],
    pub decoder_activations: [Activation; 3],
    /// Dropout keep probability on the encoder layers.
    pub keep_probability: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: WINDOW_LEN,
            channels: 8,
            encoder_kernels: [150, 75, 50],
            encoder_paddings: [20, 10, 0],
            encoder_activations: [Activation::Relu, Activation::Relu, Activation::Sigmoid],
            decoder_activations: [Activation::Sigmoid, Activation::Relu, Activation::Sigmoid],
            keep_probability: 0.5,
        }
    }
}

impl ModelConfig {
    /// Same architecture at a size where finite differences are cheap.
    pub fn shrunken() -> Self {
        Self {
            window: 32,
            encoder_kernels: [9, 5, 3],
            encoder_paddings: [2, 1, 0],
            ..Self::default()
        }
    }

    pub fn layer_specs(&self) -> [LayerSpec; NUM_LAYERS] {
        let c = self.channels;
        let k = self.encoder_kernels;
        let p = self.encoder_paddings;
        let enc = |i: usize, cin: usize| LayerSpec {
            kind: ConvKind::Conv,
            in_channels: cin,
            out_channels: c,
            kernel_size: k[i],
            padding: p[i],
            activation: self.encoder_activations[i],
        };
        let dec = |i: usize, cout: usize| LayerSpec {
            kind: ConvKind::Transpose,
            in_channels: c,
            out_channels: cout,
            kernel_size: k[2 - i],
            padding: p[2 - i],
            activation: self.decoder_activations[i],
        };
        [enc(0, 1), enc(1, c), enc(2, c), dec(0, c), dec(1, c), dec(2, 1)]
    }

    /// Signal length at the input and after each of the six layers.
    pub fn shape_plan(&self) -> Result<Vec<usize>> {
        if self.window == 0 || self.channels == 0 {
            return Err(Error::Build {
                stage: "input".into(),
                reason: "window and channel count must be positive".into(),
            });
        }
        if !(self.keep_probability > 0.0 && self.keep_probability <= 1.0) {
            return Err(Error::Build {
                stage: "dropout".into(),
                reason: format!("keep probability {} not in (0, 1]", self.keep_probability),
            });
        }
        let mut plan = vec![self.window];
        let mut len = self.window;
        for (i, spec) in self.layer_specs().iter().enumerate() {
            if spec.kernel_size == 0 {
                return Err(Error::Build {
                    stage: stage_name(i),
                    reason: "kernel size must be positive".into(),
                });
            }
            let layer = ConvLayerParams::zeros(1, 1, spec.kernel_size, spec.padding);
            len = layer.output_length(spec.kind, len).ok_or_else(|| Error::Build {
                stage: stage_name(i),
                reason: format!(
                    "input length {len} with kernel {} and padding {} gives an empty output",
                    spec.kernel_size, spec.padding
                ),
            })?;
            plan.push(len);
        }
        if len != self.window {
            return Err(Error::Build {
                stage: stage_name(NUM_LAYERS - 1),
                reason: format!("output length {len} differs from window {}", self.window),
            });
        }
        Ok(plan)
    }

    pub fn num_params(&self) -> usize {
        self.layer_specs()
            .iter()
            .map(|s| s.in_channels * s.out_channels * s.kernel_size + s.out_channels)
            .sum()
    }
}

pub fn stage_name(layer: usize) -> String {
    if layer < 3 {
        format!("encoder layer {}", layer + 1)
    } else {
        format!("decoder layer {}", layer - 2)
    }
}

/// Activation at the encoder bottleneck (channels x positions).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMap(FeatureMap);

impl LatentMap {
    pub fn new(map: FeatureMap) -> Self {
        Self(map)
    }

    pub fn as_feature_map(&self) -> &FeatureMap {
        &self.0
    }

    pub fn into_feature_map(self) -> FeatureMap {
        self.0
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input to each layer (after the previous layer's dropout).
    pub inputs: Vec<FeatureMap>,
    /// Post-activation output of each layer, before dropout.
    pub activations: Vec<FeatureMap>,
    pub masks: Vec<Option<DropoutMask>>,
    pub training: bool,
}

impl ForwardTrace {
    pub fn output(&self) -> &FeatureMap {
        self.activations.last().expect("six layers")
    }

    pub fn latent(&self) -> &FeatureMap {
        &self.activations[2]
    }
}

/// Per-layer parameter gradients, laid out like the layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl ModelGrads {
    pub fn zeros_like(model: &EncoderDecoderModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.weights.iter_mut().for_each(|w| w.fill(value));
        self.bias.iter_mut().for_each(|b| b.fill(value));
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoderModel {
    config: ModelConfig,
    shape_plan: Vec<usize>,
    pub(crate) layers: Vec<ConvLayerParams>,
    pub(crate) adam: Vec<AdamState>,
}

/// Builds a freshly initialized model.
pub fn build_model(config: &ModelConfig, rng_seed: u64) -> Result<EncoderDecoderModel> {
    EncoderDecoderModel::new(config.clone(), rng_seed)
}

impl EncoderDecoderModel {
    pub fn new(config: ModelConfig, rng_seed: u64) -> Result<Self> {
        let shape_plan = config.shape_plan()?;
        let layers = config
            .layer_specs()
            .iter()
            .enumerate()
            .map(|(i, spec)| init_params(spec, mix_seed(rng_seed, i as u64)))
            .collect();
        let mut model = Self {
            config,
            shape_plan,
            layers,
            adam: Vec::new(),
        };
        model.reset_optimizer(AdamConfig::default());
        Ok(model)
    }

    /// Assembles a model from explicit layer parameters, checking every
    /// layer against the configuration.
    pub fn from_layers(config: ModelConfig, layers: Vec<ConvLayerParams>) -> Result<Self> {
        let shape_plan = config.shape_plan()?;
        if layers.len() != NUM_LAYERS {
            return Err(Error::ShapeMismatch(format!(
                "expected {NUM_LAYERS} layers, got {}",
                layers.len()
            )));
        }
        for (i, (layer, spec)) in layers.iter().zip(config.layer_specs()).enumerate() {
            layer
                .validate()
                .map_err(|e| Error::ShapeMismatch(format!("{}: {e}", stage_name(i))))?;
            if (layer.in_channels, layer.out_channels, layer.kernel_size, layer.padding)
                != (spec.in_channels, spec.out_channels, spec.kernel_size, spec.padding)
            {
                return Err(Error::ShapeMismatch(format!(
                    "{} has dims {}x{}x{} pad {}, expected {}x{}x{} pad {}",
                    stage_name(i),
                    layer.out_channels,
                    layer.in_channels,
                    layer.kernel_size,
                    layer.padding,
                    spec.out_channels,
                    spec.in_channels,
                    spec.kernel_size,
                    spec.padding
                )));
            }
        }
        let mut model = Self {
            config,
            shape_plan,
            layers,
            adam: Vec::new(),
        };
        model.reset_optimizer(AdamConfig::default());
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shape_plan(&self) -> &[usize] {
        &self.shape_plan
    }

    pub fn layers(&self) -> &[ConvLayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayerParams] {
        &mut self.layers
    }

    pub fn adam_states(&self) -> &[AdamState] {
        &self.adam
    }

    pub(crate) fn set_adam_states(&mut self, states: Vec<AdamState>) {
        self.adam = states;
    }

    pub fn set_keep_probability(&mut self, keep_probability: f64) -> Result<()> {
        if !(keep_probability > 0.0 && keep_probability <= 1.0) {
            return Err(Error::Parameter(format!(
                "keep probability must be in (0, 1], got {keep_probability}"
            )));
        }
        self.config.keep_probability = keep_probability;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(ConvLayerParams::num_params).sum()
    }

    /// Discards optimizer moments, e.g. before retraining on a new dataset.
    pub fn reset_optimizer(&mut self, config: AdamConfig) {
        self.adam = self
            .layers
            .iter()
            .map(|l| AdamState::new(l.num_params(), config))
            .collect();
    }

    fn check_input(&self, input: &FeatureMap) -> Result<()> {
        if input.shape() != (1, self.config.window) {
            return Err(Error::Shape(format!(
                "model expects a 1x{} window, got {:?}",
                self.config.window,
                input.shape()
            )));
        }
        if !input.is_finite() {
            return Err(Error::Shape("input window contains non-finite values".into()));
        }
        Ok(())
    }

    /// Runs the network and keeps every intermediate needed for backprop.
    /// Dropout is active only when `training` is set; its masks are derived
    /// from `rng_seed`.
    pub fn forward_trace(&self, input: &FeatureMap, training: bool, rng_seed: u64) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let specs = self.config.layer_specs();
        let mut inputs = Vec::with_capacity(NUM_LAYERS);
        let mut activations = Vec::with_capacity(NUM_LAYERS);
        let mut masks = Vec::with_capacity(NUM_LAYERS);
        let mut x = input.clone();
        for (i, (layer, spec)) in self.layers.iter().zip(specs.iter()).enumerate() {
            let z = match spec.kind {
                ConvKind::Conv => conv1d_forward(&x, layer)?,
                ConvKind::Transpose => conv_transpose1d_forward(&x, layer)?,
            };
            let a = spec.activation.forward(&z);
            let mask = if training && i < 3 && self.config.keep_probability < 1.0 {
                Some(DropoutMask::generate(
                    a.values().len(),
                    self.config.keep_probability,
                    mix_seed(rng_seed, i as u64),
                )?)
            } else {
                None
            };
            let next = match &mask {
                Some(m) => dropout_apply(&a, m, true)?,
                None => a.clone(),
            };
            inputs.push(std::mem::replace(&mut x, next));
            activations.push(a);
            masks.push(mask);
        }
        Ok(ForwardTrace {
            inputs,
            activations,
            masks,
            training,
        })
    }

    /// Output waveform and bottleneck activation for one window.
    pub fn forward(&self, input: &FeatureMap, training: bool, rng_seed: u64) -> Result<(FeatureMap, LatentMap)> {
        let mut trace = self.forward_trace(input, training, rng_seed)?;
        let output = trace.activations.pop().expect("six layers");
        let latent = trace.activations.swap_remove(2);
        Ok((output, LatentMap(latent)))
    }

    /// Inference-mode prediction for a raw window slice.
    pub fn predict(&self, window: &[f64]) -> Result<Vec<f64>> {
        let input = FeatureMap::from_signal(window)?;
        Ok(self.forward(&input, false, 0)?.0.into_values())
    }

    /// Post-activation outputs of the three encoder layers in inference mode.
    pub fn encode(&self, input: &FeatureMap) -> Result<[FeatureMap; 3]> {
        self.check_input(input)?;
        let specs = self.config.layer_specs();
        let a1 = specs[0].activation.forward(&conv1d_forward(input, &self.layers[0])?);
        let a2 = specs[1].activation.forward(&conv1d_forward(&a1, &self.layers[1])?);
        let a3 = specs[2].activation.forward(&conv1d_forward(&a2, &self.layers[2])?);
        Ok([a1, a2, a3])
    }

    /// Accumulates parameter gradients for `grad_output` (the cotangent of
    /// the network output) into `grads`.
    pub fn backward(&self, trace: &ForwardTrace, grad_output: &FeatureMap, grads: &mut ModelGrads) -> Result<()> {
        let specs = self.config.layer_specs();
        let mut g = grad_output.clone();
        for i in (0..NUM_LAYERS).rev() {
            if let Some(mask) = &trace.masks[i] {
                g = dropout_backward(&g, mask, trace.training)?;
            }
            let gz = specs[i].activation.backward(&trace.activations[i], &g)?;
            let want_input = i > 0;
            let gi = match specs[i].kind {
                ConvKind::Conv => conv1d_backward_accumulate(
                    &trace.inputs[i],
                    &self.layers[i],
                    &gz,
                    &mut grads.weights[i],
                    &mut grads.bias[i],
                    want_input,
                )?,
                ConvKind::Transpose => conv_transpose1d_backward_accumulate(
                    &trace.inputs[i],
                    &self.layers[i],
                    &gz,
                    &mut grads.weights[i],
                    &mut grads.bias[i],
                    want_input,
                )?,
            };
            if let Some(gi) = gi {
                g = gi;
            }
        }
        Ok(())
    }

    /// One Adam step per layer with the stored optimizer state.
    pub fn apply_gradients(&mut self, grads: &ModelGrads, learning_rate: f64) -> Result<()> {
        // Check everything first so a bad layer leaves the model untouched.
        for (i, (w, b)) in grads.weights.iter().zip(&grads.bias).enumerate() {
            if w.iter().chain(b).any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { layer: i });
            }
        }
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let nw = layer.weights.len();
            let mut params: Vec<f64> = layer.weights.iter().chain(&layer.bias).copied().collect();
            let flat: Vec<f64> = grads.weights[i].iter().chain(&grads.bias[i]).copied().collect();
            adam_step(&mut params, &flat, &mut self.adam[i], learning_rate, i)?;
            layer.weights.copy_from_slice(&params[..nw]);
            layer.bias.copy_from_slice(&params[nw..]);
        }
        Ok(())
    }
}
