//! Binary weight files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic            8 bytes  "RSPCDC01"
//! window_length    u32
//! keep_probability f32
//! layer_count      u32      (always 6)
//! per layer, 20 bytes:
//!   kind u8 (0 conv, 1 transposed), activation u8 (0 relu, 1 sigmoid),
//!   reserved u16 (0), in_channels u32, out_channels u32,
//!   kernel_size u32, padding u32
//! flags            u32      bit 0: Adam block present
//! weights          f32 per parameter, layer by layer: weights then bias
//! [Adam block]     per layer: step u64, beta1 f64, beta2 f64, epsilon f64,
//!                  first moments f32 x n, second moments f32 x n
//! ```
//!
//! Conv weights are `[out][in][k]`; transposed conv weights are `[in][out][k]`.

use std::fs;
use std::path::Path;

use super::{EncoderDecoderModel, ModelConfig, NUM_LAYERS};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, ConvKind, ConvLayerParams};

pub const WEIGHT_MAGIC: &[u8; 8] = b"RSPCDC01";
const FLAG_ADAM: u32 = 1;
const LAYER_HEADER_BYTES: usize = 20;

/// Header size following the magic.
pub const HEADER_BYTES: usize = 4 + 4 + 4 + NUM_LAYERS * LAYER_HEADER_BYTES + 4;

pub fn encode_weights(model: &EncoderDecoderModel, include_adam: bool) -> Vec<u8> {
    let config = model.config();
    let mut out = Vec::with_capacity(8 + HEADER_BYTES + 4 * model.num_params());
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&(config.window as u32).to_le_bytes());
    out.extend_from_slice(&(config.keep_probability as f32).to_le_bytes());
    out.extend_from_slice(&(NUM_LAYERS as u32).to_le_bytes());
    for (layer, spec) in model.layers().iter().zip(config.layer_specs()) {
        out.push(match spec.kind {
            ConvKind::Conv => 0,
            ConvKind::Transpose => 1,
        });
        out.push(spec.activation.code());
        out.extend_from_slice(&0u16.to_le_bytes());
        for dim in [
            layer.in_channels,
            layer.out_channels,
            layer.kernel_size,
            layer.padding,
        ] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
    }
    let flags = if include_adam { FLAG_ADAM } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for layer in model.layers() {
        for &v in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if include_adam {
        for state in model.adam_states() {
            out.extend_from_slice(&state.step_count.to_le_bytes());
            for v in [state.beta1, state.beta2, state.epsilon] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for &v in state.first_moment.iter().chain(&state.second_moment) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn save_weights(model: &EncoderDecoderModel, path: &Path, include_adam: bool) -> Result<()> {
    fs::write(path, encode_weights(model, include_adam))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

struct LayerHeader {
    kind: ConvKind,
    activation: Activation,
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    padding: usize,
}

pub fn decode_weights(bytes: &[u8]) -> Result<EncoderDecoderModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(|_| Error::BadMagic)? != WEIGHT_MAGIC {
        return Err(Error::BadMagic);
    }
    let window = r.u32()? as usize;
    let keep_probability = r.f32()?;
    let count = r.u32()? as usize;
    if count != NUM_LAYERS {
        return Err(Error::ShapeMismatch(format!(
            "expected {NUM_LAYERS} layers, header says {count}"
        )));
    }
    let mut headers = Vec::with_capacity(NUM_LAYERS);
    for i in 0..NUM_LAYERS {
        let kind = match r.u8()? {
            0 => ConvKind::Conv,
            1 => ConvKind::Transpose,
            k => return Err(Error::ShapeMismatch(format!("layer {i}: unknown kind {k}"))),
        };
        let activation = Activation::from_code(r.u8()?)
            .ok_or_else(|| Error::ShapeMismatch(format!("layer {i}: unknown activation")))?;
        let _reserved = r.u16()?;
        headers.push(LayerHeader {
            kind,
            activation,
            in_channels: r.u32()? as usize,
            out_channels: r.u32()? as usize,
            kernel_size: r.u32()? as usize,
            padding: r.u32()? as usize,
        });
    }
    let flags = r.u32()?;
    if flags & !FLAG_ADAM != 0 {
        return Err(Error::ShapeMismatch(format!("unknown flags {flags:#x}")));
    }

    let expected_kinds = [
        ConvKind::Conv,
        ConvKind::Conv,
        ConvKind::Conv,
        ConvKind::Transpose,
        ConvKind::Transpose,
        ConvKind::Transpose,
    ];
    for (i, (h, kind)) in headers.iter().zip(expected_kinds).enumerate() {
        if h.kind != kind {
            return Err(Error::ShapeMismatch(format!("layer {i} has the wrong kind")));
        }
    }
    let config = ModelConfig {
        window,
        channels: headers[0].out_channels,
        encoder_kernels: [
            headers[0].kernel_size,
            headers[1].kernel_size,
            headers[2].kernel_size,
        ],
        encoder_paddings: [headers[0].padding, headers[1].padding, headers[2].padding],
        encoder_activations: [
            headers[0].activation,
            headers[1].activation,
            headers[2].activation,
        ],
        decoder_activations: [
            headers[3].activation,
            headers[4].activation,
            headers[5].activation,
        ],
        keep_probability,
    };
    config
        .shape_plan()
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;

    let mut layers = Vec::with_capacity(NUM_LAYERS);
    for h in &headers {
        let n_w = h
            .in_channels
            .checked_mul(h.out_channels)
            .and_then(|v| v.checked_mul(h.kernel_size))
            .ok_or_else(|| Error::ShapeMismatch("layer dimensions overflow".into()))?;
        layers.push(ConvLayerParams {
            in_channels: h.in_channels,
            out_channels: h.out_channels,
            kernel_size: h.kernel_size,
            padding: h.padding,
            weights: r.f32_vec(n_w)?,
            bias: r.f32_vec(h.out_channels)?,
        });
    }
    let mut model = EncoderDecoderModel::from_layers(config, layers)?;

    if flags & FLAG_ADAM != 0 {
        let mut states = Vec::with_capacity(NUM_LAYERS);
        for layer in model.layers() {
            let n = layer.num_params();
            let step_count = r.u64()?;
            let (beta1, beta2, epsilon) = (r.f64()?, r.f64()?, r.f64()?);
            let first_moment = r.f32_vec(n)?;
            let second_moment = r.f32_vec(n)?;
            if second_moment.iter().any(|&v| v < 0.0) {
                return Err(Error::ShapeMismatch("negative second moment".into()));
            }
            states.push(AdamState {
                first_moment,
                second_moment,
                step_count,
                beta1,
                beta2,
                epsilon,
            });
        }
        model.set_adam_states(states);
    }
    if r.pos != bytes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} trailing bytes after weights",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}

pub fn load_weights(path: &Path) -> Result<EncoderDecoderModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_weights(&bytes)
}
