//! Which first-layer kernel drives the strongest latent response, and at
//! which respiratory rates.
//!
//! Channel, position and kernel indices are 0-based in this API. The CSV
//! exports number kernels from 1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::segment::segment_test_with;
use crate::data::{InputScaling, Recording, TEST_STRIDE};
use crate::error::{Error, Result};
use crate::model::{EncoderDecoderModel, WINDOW_LEN};
use crate::nn::{ConvLayerParams, FeatureMap};
use crate::SAMPLE_RATE_HZ;

/// One second of kernel taps at 30 Hz.
pub const SMOOTHING_WIDTH: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentArgmax {
    pub channel: usize,
    pub position: usize,
    pub value: f64,
}

/// Where the maximum is taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionMode {
    /// Maximum of the bottleneck, traced back through layers 3 and 2.
    #[default]
    Bottleneck,
    /// Maximum of the first-layer activations; its channel is the kernel.
    FirstLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAttribution {
    pub subject_id: String,
    pub window_start_s: f64,
    pub latent: LatentArgmax,
    pub kernel: usize,
    pub rr_bpm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRrDistribution {
    /// Reference rates of the windows attributed to each kernel.
    pub per_kernel: Vec<Vec<f64>>,
    pub attributions: Vec<KernelAttribution>,
    /// Windows without a reference rate.
    pub skipped: usize,
}

/// Largest value of `map`; ties go to the lowest channel, then the lowest
/// position.
pub fn argmax_map(map: &FeatureMap) -> LatentArgmax {
    let mut best = LatentArgmax {
        channel: 0,
        position: 0,
        value: f64::NEG_INFINITY,
    };
    for c in 0..map.channels() {
        for (t, &v) in map.channel(c).iter().enumerate() {
            if v > best.value {
                best = LatentArgmax {
                    channel: c,
                    position: t,
                    value: v,
                };
            }
        }
    }
    best
}

pub fn latent_argmax(model: &EncoderDecoderModel, window: &[f64]) -> Result<LatentArgmax> {
    let [_, _, latent] = model.encode(&FeatureMap::from_signal(window)?)?;
    Ok(argmax_map(&latent))
}

fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Summed contribution of every input channel to the pre-activation of
/// output unit `(channel, position)` of a convolution layer.
fn channel_contributions(layer: &ConvLayerParams, input: &FeatureMap, channel: usize, position: usize) -> Vec<f64> {
    let (k, p) = (layer.kernel_size, layer.padding);
    (0..layer.in_channels)
        .map(|i| {
            let w = &layer.weights[(channel * layer.in_channels + i) * k..][..k];
            let x = input.channel(i);
            w.iter()
                .enumerate()
                .filter_map(|(j, wj)| {
                    (position + j).checked_sub(p).and_then(|s| x.get(s)).map(|xs| wj * xs)
                })
                .sum()
        })
        .collect()
}

/// Follows the largest contribution from a bottleneck unit back to a
/// first-layer kernel: the layer-3 input channel with the largest summed
/// contribution, then that channel's strongest layer-2 unit within the
/// receptive field, then the layer-2 input channel contributing most to it.
/// Ties go to the lowest index.
pub fn trace_to_layer1(model: &EncoderDecoderModel, window: &[f64], argmax: LatentArgmax) -> Result<usize> {
    let [a1, a2, _] = model.encode(&FeatureMap::from_signal(window)?)?;
    let layers = model.layers();
    let c2 = argmax_first(channel_contributions(&layers[2], &a2, argmax.channel, argmax.position));

    let (k3, p3) = (layers[2].kernel_size, layers[2].padding);
    let lo = argmax.position.saturating_sub(p3);
    let hi = (argmax.position + k3).saturating_sub(p3).min(a2.length());
    let field = &a2.channel(c2)[lo..hi.max(lo + 1).min(a2.length())];
    let t2 = lo + argmax_first(field.iter().copied());

    Ok(argmax_first(channel_contributions(&layers[1], &a1, c2, t2)))
}

/// The first-layer kernel credited with the window's strongest response.
pub fn attribute_window(
    model: &EncoderDecoderModel,
    window: &[f64],
    mode: AttributionMode,
) -> Result<(LatentArgmax, usize)> {
    match mode {
        AttributionMode::Bottleneck => {
            let latent = latent_argmax(model, window)?;
            Ok((latent, trace_to_layer1(model, window, latent)?))
        }
        AttributionMode::FirstLayer => {
            let [a1, _, _] = model.encode(&FeatureMap::from_signal(window)?)?;
            let latent = argmax_map(&a1);
            Ok((latent, latent.channel))
        }
    }
}

/// Attributes every sliding test window of every recording and groups the
/// windows' reference rates by kernel. The reference rate of a window is
/// the mean of the annotations inside it; windows without one are skipped.
pub fn kernel_rr_distribution(
    model: &EncoderDecoderModel,
    recordings: &[Recording],
    mode: AttributionMode,
    scaling: InputScaling,
) -> Result<KernelRrDistribution> {
    if recordings.is_empty() {
        return Err(Error::EmptyDistribution("no recordings".into()));
    }
    let n_kernels = model.layers()[0].out_channels;
    let mut per_kernel = vec![Vec::new(); n_kernels];
    let mut attributions = Vec::new();
    let mut skipped = 0;
    let span_s = WINDOW_LEN as f64 / SAMPLE_RATE_HZ;
    for rec in recordings {
        for seg in segment_test_with(rec, scaling)? {
            let start_s = seg.start_index as f64 / SAMPLE_RATE_HZ;
            let Some(rr_bpm) = rec.mean_annotated_rr(start_s, start_s + span_s) else {
                skipped += 1;
                continue;
            };
            let (latent, kernel) = attribute_window(model, &seg.input, mode)?;
            per_kernel[kernel].push(rr_bpm);
            attributions.push(KernelAttribution {
                subject_id: rec.subject_id.clone(),
                window_start_s: start_s,
                latent,
                kernel,
                rr_bpm,
            });
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} windows without a reference rate were skipped");
    }
    if attributions.is_empty() {
        return Err(Error::EmptyDistribution(format!(
            "no annotated windows ({skipped} skipped, stride {TEST_STRIDE} samples)"
        )));
    }
    Ok(KernelRrDistribution {
        per_kernel,
        attributions,
        skipped,
    })
}

/// Centered moving average over [`SMOOTHING_WIDTH`] taps (`i - 15 ..= i + 14`),
/// averaging only the taps that exist near the ends.
pub fn smooth_kernel(weights: &[f64]) -> Vec<f64> {
    let before = SMOOTHING_WIDTH / 2;
    let after = SMOOTHING_WIDTH - before - 1;
    let mut prefix = vec![0.0; weights.len() + 1];
    for (i, w) in weights.iter().enumerate() {
        prefix[i + 1] = prefix[i] + w;
    }
    (0..weights.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(weights.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// The taps of first-layer kernel `kernel` (single input channel).
pub fn first_layer_kernel(model: &EncoderDecoderModel, kernel: usize) -> Result<&[f64]> {
    let layer = &model.layers()[0];
    if kernel >= layer.out_channels {
        return Err(Error::Parameter(format!(
            "kernel {kernel} out of range for {} kernels",
            layer.out_channels
        )));
    }
    let k = layer.kernel_size * layer.in_channels;
    Ok(&layer.weights[kernel * k..(kernel + 1) * k])
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("writing CSV", std::io::Error::other(e))
}

/// Rows of `kernel_index,rr_bpm`, kernels numbered from 1.
pub fn write_distribution_csv<W: Write>(dist: &KernelRrDistribution, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kernel_index", "rr_bpm"]).map_err(csv_err)?;
    for a in &dist.attributions {
        w.write_record([(a.kernel + 1).to_string(), a.rr_bpm.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}

/// Rows of `kernel_index,sample,weight,smoothed_weight` for every
/// first-layer kernel, kernels numbered from 1 and samples from 0.
pub fn write_kernel_weights_csv<W: Write>(model: &EncoderDecoderModel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kernel_index", "sample", "weight", "smoothed_weight"])
        .map_err(csv_err)?;
    for kernel in 0..model.layers()[0].out_channels {
        let taps = first_layer_kernel(model, kernel)?;
        for (i, (raw, smooth)) in taps.iter().zip(smooth_kernel(taps)).enumerate() {
            w.write_record([
                (kernel + 1).to_string(),
                i.to_string(),
                raw.to_string(),
                smooth.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("writing CSV", e))
}
