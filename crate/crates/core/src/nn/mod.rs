//! Differentiable building blocks: convolutions, activations, dropout, loss
//! and the Adam optimizer. Everything here is a pure function of its inputs
//! plus an explicit seed.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod dropout;
pub mod feature_map;
pub mod init;
mod kernel;
pub mod loss;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, Activation};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{
    conv1d_backward, conv1d_forward, conv_transpose1d_backward, conv_transpose1d_forward,
    ConvGrads, ConvKind, ConvLayerParams,
};
pub use dropout::{dropout_apply, dropout_backward, DropoutMask};
pub use feature_map::FeatureMap;
pub use init::{init_params, LayerSpec};
pub use loss::mse_loss;
