//! Stride-1 one-dimensional convolution and its adjoint.
//!
//! `conv1d_forward` is a cross-correlation (no kernel flip) with symmetric
//! zero padding. Its weights are laid out `[out][in][k]`.
//!
//! `conv_transpose1d_forward` is the exact adjoint of `conv1d_forward` plus a
//! bias. Its weights are laid out `[in][out][k]`, which is the same buffer the
//! corresponding forward convolution (mapping `out` channels back to `in`)
//! would use, so a conv layer and its transpose can share one weight array.

use super::feature_map::FeatureMap;
use super::kernel::correlate_accumulate_within;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    Conv,
    Transpose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: FeatureMap,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayerParams {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            padding,
            weights: vec![0.0; in_channels * out_channels * kernel_size],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel_size == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        let expected = self.in_channels * self.out_channels * self.kernel_size;
        if self.weights.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} weights, got {}",
                self.weights.len()
            )));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::Shape(format!(
                "expected {} biases, got {}",
                self.out_channels,
                self.bias.len()
            )));
        }
        Ok(())
    }

    /// Output length for an input of `length` samples, or `None` if the
    /// layer would produce an empty output.
    pub fn output_length(&self, kind: ConvKind, length: usize) -> Option<usize> {
        let (l, k, p) = (
            length as isize,
            self.kernel_size as isize,
            self.padding as isize,
        );
        let out = match kind {
            ConvKind::Conv => l + 2 * p - k + 1,
            ConvKind::Transpose => l - 1 + k - 2 * p,
        };
        (out > 0).then_some(out as usize)
    }

    fn check_input(&self, kind: ConvKind, input: &FeatureMap) -> Result<usize> {
        self.validate()?;
        if input.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "input has {} channels, layer expects {}",
                input.channels(),
                self.in_channels
            )));
        }
        self.output_length(kind, input.length()).ok_or_else(|| {
            Error::Shape(format!(
                "input length {} with kernel {} and padding {} gives no output",
                input.length(),
                self.kernel_size,
                self.padding
            ))
        })
    }

    fn check_grad(&self, kind: ConvKind, input: &FeatureMap, grad_out: &FeatureMap) -> Result<()> {
        let out_len = self.check_input(kind, input)?;
        if grad_out.shape() != (self.out_channels, out_len) {
            return Err(Error::Shape(format!(
                "cotangent shape {:?} does not match output shape {:?}",
                grad_out.shape(),
                (self.out_channels, out_len)
            )));
        }
        Ok(())
    }
}

fn pad_channels(input: &FeatureMap, before: usize, after: usize) -> Vec<Vec<f64>> {
    (0..input.channels())
        .map(|i| pad_row(input.channel(i), before, after))
        .collect()
}

fn pad_row(row: &[f64], before: usize, after: usize) -> Vec<f64> {
    let mut out = vec![0.0; before + row.len() + after];
    out[before..before + row.len()].copy_from_slice(row);
    out
}

fn rows(padded: &[Vec<f64>], from: usize) -> Vec<&[f64]> {
    padded.iter().map(|r| &r[from..]).collect()
}

/// Swaps the first two axes of a `[a][b][k]` kernel and reverses each tap
/// sequence, giving the `[b][a][k]` kernel of the adjoint correlation.
fn swap_and_flip(weights: &[f64], a: usize, b: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; weights.len()];
    for ia in 0..a {
        for ib in 0..b {
            let src = &weights[(ia * b + ib) * k..][..k];
            let dst = &mut out[(ib * a + ia) * k..][..k];
            for (d, s) in dst.iter_mut().zip(src.iter().rev()) {
                *d = *s;
            }
        }
    }
    out
}

fn add_bias(values: &mut [f64], bias: &[f64], len: usize) {
    for (row, b) in values.chunks_mut(len).zip(bias) {
        row.iter_mut().for_each(|v| *v += b);
    }
}

pub fn conv1d_forward(input: &FeatureMap, layer: &ConvLayerParams) -> Result<FeatureMap> {
    let out_len = layer.check_input(ConvKind::Conv, input)?;
    let padded = pad_channels(input, layer.padding, layer.padding);
    let mut values = vec![0.0; layer.out_channels * out_len];
    let p = layer.padding;
    correlate_accumulate_within(
        &layer.weights,
        layer.out_channels,
        layer.kernel_size,
        &rows(&padded, 0),
        p..p + input.length(),
        &mut values,
        out_len,
    );
    add_bias(&mut values, &layer.bias, out_len);
    FeatureMap::new(layer.out_channels, out_len, values)
}

/// Accumulates parameter gradients of `conv1d_forward` into `grad_w` and
/// `grad_b`; returns the input gradient when `want_input` is set.
pub(crate) fn conv1d_backward_accumulate(
    input: &FeatureMap,
    layer: &ConvLayerParams,
    grad_out: &FeatureMap,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Result<Option<FeatureMap>> {
    layer.check_grad(ConvKind::Conv, input, grad_out)?;
    let (cin, cout, k, p) = (
        layer.in_channels,
        layer.out_channels,
        layer.kernel_size,
        layer.padding,
    );
    let out_len = grad_out.length();
    for (o, gb) in grad_b.iter_mut().enumerate() {
        *gb += grad_out.channel(o).iter().sum::<f64>();
    }
    // dW[o][i][j] = sum_t g[o][t] x[i][t + j]
    let padded = pad_channels(input, p, p);
    let mut tmp = vec![0.0; cout * k];
    for (i, xi) in padded.iter().enumerate() {
        tmp.fill(0.0);
        correlate_accumulate_within(grad_out.values(), cout, out_len, &[xi], p..p + input.length(), &mut tmp, k);
        for o in 0..cout {
            for (gw, t) in grad_w[(o * cin + i) * k..][..k].iter_mut().zip(&tmp[o * k..][..k]) {
                *gw += t;
            }
        }
    }
    if !want_input {
        return Ok(None);
    }
    // dX[i][s] = sum_o sum_j W[o][i][k-1-j] gz[o][s + j], gz = g padded by k-1
    let l = input.length();
    let gz: Vec<Vec<f64>> = (0..cout).map(|o| pad_row(grad_out.channel(o), k - 1, k - 1)).collect();
    let flipped = swap_and_flip(&layer.weights, cout, cin, k);
    let mut values = vec![0.0; cin * l];
    let support = (k - 1).saturating_sub(p)..(k - 1 + out_len).saturating_sub(p);
    correlate_accumulate_within(&flipped, cin, k, &rows(&gz, p), support, &mut values, l);
    FeatureMap::new(cin, l, values).map(Some)
}

pub fn conv1d_backward(
    input: &FeatureMap,
    layer: &ConvLayerParams,
    grad_out: &FeatureMap,
) -> Result<ConvGrads> {
    let mut weights = vec![0.0; layer.weights.len()];
    let mut bias = vec![0.0; layer.bias.len()];
    let grad_input =
        conv1d_backward_accumulate(input, layer, grad_out, &mut weights, &mut bias, true)?
            .expect("input gradient requested");
    Ok(ConvGrads {
        input: grad_input,
        weights,
        bias,
    })
}

pub fn conv_transpose1d_forward(input: &FeatureMap, layer: &ConvLayerParams) -> Result<FeatureMap> {
    let out_len = layer.check_input(ConvKind::Transpose, input)?;
    let (cin, cout, k, p) = (
        layer.in_channels,
        layer.out_channels,
        layer.kernel_size,
        layer.padding,
    );
    // out[o][s] = sum_i sum_j W[i][o][k-1-j] xz[i][s + p + j], xz = x padded by k-1
    let xz = pad_channels(input, k - 1, k - 1);
    let flipped = swap_and_flip(&layer.weights, cin, cout, k);
    let mut values = vec![0.0; cout * out_len];
    let support = (k - 1).saturating_sub(p)..(k - 1 + input.length()).saturating_sub(p);
    correlate_accumulate_within(&flipped, cout, k, &rows(&xz, p), support, &mut values, out_len);
    add_bias(&mut values, &layer.bias, out_len);
    FeatureMap::new(cout, out_len, values)
}

pub(crate) fn conv_transpose1d_backward_accumulate(
    input: &FeatureMap,
    layer: &ConvLayerParams,
    grad_out: &FeatureMap,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Result<Option<FeatureMap>> {
    layer.check_grad(ConvKind::Transpose, input, grad_out)?;
    let (cin, cout, k, p) = (
        layer.in_channels,
        layer.out_channels,
        layer.kernel_size,
        layer.padding,
    );
    let l = input.length();
    for (o, gb) in grad_b.iter_mut().enumerate() {
        *gb += grad_out.channel(o).iter().sum::<f64>();
    }
    // the cotangent of the unpadded full-length output
    let grad_full = pad_channels(grad_out, p, p);
    // dW[i][o][j] = sum_t x[i][t] gfull[o][t + j]
    let mut tmp = vec![0.0; cin * k];
    for (o, g) in grad_full.iter().enumerate() {
        tmp.fill(0.0);
        correlate_accumulate_within(input.values(), cin, l, &[g], p..p + grad_out.length(), &mut tmp, k);
        for i in 0..cin {
            for (gw, t) in grad_w[(i * cout + o) * k..][..k].iter_mut().zip(&tmp[i * k..][..k]) {
                *gw += t;
            }
        }
    }
    if !want_input {
        return Ok(None);
    }
    // dX[i][t] = sum_o sum_j W[i][o][j] gfull[o][t + j]
    let mut values = vec![0.0; cin * l];
    correlate_accumulate_within(&layer.weights, cin, k, &rows(&grad_full, 0), p..p + grad_out.length(), &mut values, l);
    FeatureMap::new(cin, l, values).map(Some)
}

pub fn conv_transpose1d_backward(
    input: &FeatureMap,
    layer: &ConvLayerParams,
    grad_out: &FeatureMap,
) -> Result<ConvGrads> {
    let mut weights = vec![0.0; layer.weights.len()];
    let mut bias = vec![0.0; layer.bias.len()];
    let grad_input =
        conv_transpose1d_backward_accumulate(input, layer, grad_out, &mut weights, &mut bias, true)?
            .expect("input gradient requested");
    Ok(ConvGrads {
        input: grad_input,
        weights,
        bias,
    })
}
