use serde::{Deserialize, Serialize};

use super::feature_map::FeatureMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn forward(self, input: &FeatureMap) -> FeatureMap {
        match self {
            Activation::Relu => relu(input),
            Activation::Sigmoid => sigmoid(input),
        }
    }

    /// Backward pass expressed through the forward *output*, which is what
    /// the training loop keeps around.
    pub fn backward(self, output: &FeatureMap, grad_out: &FeatureMap) -> Result<FeatureMap> {
        match self {
            Activation::Relu => relu_backward(output, grad_out),
            Activation::Sigmoid => sigmoid_backward(output, grad_out),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

pub fn relu(input: &FeatureMap) -> FeatureMap {
    input.map(|x| if x > 0.0 { x } else { 0.0 })
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(input: &FeatureMap) -> FeatureMap {
    input.map(sigmoid_scalar)
}

fn zip_map(a: &FeatureMap, b: &FeatureMap, f: impl Fn(f64, f64) -> f64) -> Result<FeatureMap> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "activation backward: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &g)| f(x, g))
        .collect();
    FeatureMap::new(a.channels(), a.length(), values)
}

/// ReLU derivative, taken as 0 at exactly 0. Works from either the input or
/// the output since both are positive on the same set.
pub fn relu_backward(activation: &FeatureMap, grad_out: &FeatureMap) -> Result<FeatureMap> {
    zip_map(activation, grad_out, |a, g| if a > 0.0 { g } else { 0.0 })
}

/// `grad * s * (1 - s)` where `s` is the sigmoid output.
pub fn sigmoid_backward(output: &FeatureMap, grad_out: &FeatureMap) -> Result<FeatureMap> {
    zip_map(output, grad_out, |s, g| g * s * (1.0 - s))
}
