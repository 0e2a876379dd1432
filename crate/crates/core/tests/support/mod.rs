//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code path it checks: the
//! convolutions are literal index sums, the DFT is the textbook definition,
//! least squares goes through nalgebra, and gradients are central finite
//! differences.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use ppg_resp::evaluation::fft::fft;
use ppg_resp::evaluation::{fuse_at_offsets, pls_train};
use ppg_resp::model::{build_model, EncoderDecoderModel, ForwardTrace, ModelConfig, ModelGrads};
use ppg_resp::nn::{
    conv1d_backward, conv1d_forward, conv_transpose1d_backward, conv_transpose1d_forward, dropout_apply,
    dropout_backward, mse_loss, Activation, ConvLayerParams, DropoutMask, FeatureMap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_map(rng: &mut ChaCha8Rng, channels: usize, length: usize) -> FeatureMap {
    FeatureMap::new(channels, length, random_vec(rng, channels * length)).unwrap()
}

pub fn random_layer(rng: &mut ChaCha8Rng, cin: usize, cout: usize, k: usize, padding: usize) -> ConvLayerParams {
    ConvLayerParams {
        in_channels: cin,
        out_channels: cout,
        kernel_size: k,
        padding,
        weights: random_vec(rng, cin * cout * k),
        bias: random_vec(rng, cout),
    }
}

/// Relative error between two gradient vectors, measured in the 2-norm.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    if scale < 1e-300 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x` for every coordinate.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn inner(a: &FeatureMap, b: &FeatureMap) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

fn with_weights(layer: &ConvLayerParams, w: &[f64]) -> ConvLayerParams {
    ConvLayerParams {
        weights: w.to_vec(),
        ..layer.clone()
    }
}

fn with_bias(layer: &ConvLayerParams, b: &[f64]) -> ConvLayerParams {
    ConvLayerParams {
        bias: b.to_vec(),
        ..layer.clone()
    }
}

fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize, usize, usize) {
    let cin = rng.random_range(1..=3);
    let cout = rng.random_range(1..=3);
    let k = rng.random_range(1..=5);
    let padding = rng.random_range(0..k);
    let len = rng.random_range(k.max(2)..=9);
    (cin, cout, k, padding, len)
}

/// Worst relative error of the conv (or transposed conv) backward pass over
/// `trials` random instances, for the loss `<op(x), r>`.
pub fn conv_gradient_error(trials: usize, seed: u64, transpose: bool) -> f64 {
    let mut rng = rng(seed);
    let forward = |x: &FeatureMap, l: &ConvLayerParams| {
        if transpose {
            conv_transpose1d_forward(x, l).unwrap()
        } else {
            conv1d_forward(x, l).unwrap()
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (cin, cout, k, p, len) = random_shape(&mut rng);
        let layer = random_layer(&mut rng, cin, cout, k, p);
        let x = random_map(&mut rng, cin, len);
        let y = forward(&x, &layer);
        let r = random_map(&mut rng, y.channels(), y.length());
        let grads = if transpose {
            conv_transpose1d_backward(&x, &layer, &r).unwrap()
        } else {
            conv1d_backward(&x, &layer, &r).unwrap()
        };
        let num_x = numeric_gradient(x.values(), |v| {
            inner(&forward(&FeatureMap::new(cin, len, v.to_vec()).unwrap(), &layer), &r)
        });
        let num_w = numeric_gradient(&layer.weights, |w| inner(&forward(&x, &with_weights(&layer, w)), &r));
        let num_b = numeric_gradient(&layer.bias, |b| inner(&forward(&x, &with_bias(&layer, b)), &r));
        worst = worst
            .max(relative_error(grads.input.values(), &num_x))
            .max(relative_error(&grads.weights, &num_w))
            .max(relative_error(&grads.bias, &num_b));
    }
    worst
}

/// Activations are checked away from the ReLU kink.
pub fn activation_gradient_error(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let len = rng.random_range(1..=20);
        let vals: Vec<f64> = (0..len)
            .map(|_| {
                let v: f64 = rng.random_range(0.01..3.0);
                if rng.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let x = FeatureMap::new(1, len, vals).unwrap();
        let r = random_map(&mut rng, 1, len);
        for act in [Activation::Relu, Activation::Sigmoid] {
            let y = act.forward(&x);
            let analytic = act.backward(&y, &r).unwrap();
            let numeric = numeric_gradient(x.values(), |v| {
                inner(&act.forward(&FeatureMap::new(1, len, v.to_vec()).unwrap()), &r)
            });
            worst = worst.max(relative_error(analytic.values(), &numeric));
        }
    }
    worst
}

pub fn dropout_gradient_error(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let len = rng.random_range(1..=30);
        let x = random_map(&mut rng, 2, len);
        let r = random_map(&mut rng, 2, len);
        let mask = DropoutMask::generate(2 * len, 0.5, seed ^ t as u64).unwrap();
        let analytic = dropout_backward(&r, &mask, true).unwrap();
        let numeric = numeric_gradient(x.values(), |v| {
            inner(&dropout_apply(&FeatureMap::new(2, len, v.to_vec()).unwrap(), &mask, true).unwrap(), &r)
        });
        worst = worst.max(relative_error(analytic.values(), &numeric));
    }
    worst
}

pub fn mse_gradient_error(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let len = rng.random_range(1..=40);
        let p = random_map(&mut rng, 1, len);
        let target = random_map(&mut rng, 1, len);
        let (_, analytic) = mse_loss(&p, &target).unwrap();
        let numeric = numeric_gradient(p.values(), |v| {
            mse_loss(&FeatureMap::new(1, len, v.to_vec()).unwrap(), &target).unwrap().0
        });
        worst = worst.max(relative_error(analytic.values(), &numeric));
    }
    worst
}

const KINK_MARGIN: f64 = 1e-3;

/// Smallest |pre-activation| over the ReLU layers, recomputed with the
/// direct-sum convolutions.
pub fn relu_margin(model: &EncoderDecoderModel, trace: &ForwardTrace) -> f64 {
    let config = model.config();
    let acts = config.encoder_activations.iter().chain(&config.decoder_activations);
    let mut margin = f64::INFINITY;
    for (i, (layer, act)) in model.layers().iter().zip(acts).enumerate() {
        if *act != Activation::Relu {
            continue;
        }
        let z = if i < 3 {
            conv1d_direct(&trace.inputs[i], layer)
        } else {
            conv_transpose1d_direct(&trace.inputs[i], layer)
        };
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
    }
    margin
}

/// End-to-end parameter gradient of the MSE of the shrunken model, with
/// dropout active under a fixed mask seed.
pub fn model_gradient_error(trials: usize, seed: u64) -> f64 {
    let config = ModelConfig::shrunken();
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        // redraw until no ReLU sits close enough to its kink for a probe to cross it
        let (model, x, target, mask_seed) = loop {
            let model = build_model(&config, rng.random()).unwrap();
            let x = random_map(&mut rng, 1, config.window);
            let target =
                FeatureMap::new(1, config.window, (0..config.window).map(|_| rng.random()).collect()).unwrap();
            let mask_seed: u64 = rng.random();
            if relu_margin(&model, &model.forward_trace(&x, true, mask_seed).unwrap()) > KINK_MARGIN {
                break (model, x, target, mask_seed);
            }
        };
        let loss_of = |m: &EncoderDecoderModel| {
            let trace = m.forward_trace(&x, true, mask_seed).unwrap();
            mse_loss(trace.output(), &target).unwrap().0
        };
        let trace = model.forward_trace(&x, true, mask_seed).unwrap();
        let (_, g) = mse_loss(trace.output(), &target).unwrap();
        let mut grads = ModelGrads::zeros_like(&model);
        model.backward(&trace, &g, &mut grads).unwrap();

        let mut analytic = Vec::new();
        let mut flat = Vec::new();
        for (i, layer) in model.layers().iter().enumerate() {
            analytic.extend_from_slice(&grads.weights[i]);
            analytic.extend_from_slice(&grads.bias[i]);
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        let mut probe = model.clone();
        let numeric = numeric_gradient(&flat, |v| {
            let mut offset = 0;
            for layer in probe.layers_mut() {
                let nw = layer.weights.len();
                layer.weights.copy_from_slice(&v[offset..offset + nw]);
                offset += nw;
                let nb = layer.bias.len();
                layer.bias.copy_from_slice(&v[offset..offset + nb]);
                offset += nb;
            }
            loss_of(&probe)
        });
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// `out[o][t] = b[o] + sum_i sum_j w[o][i][j] * x[i][t + j - p]`
pub fn conv1d_direct(x: &FeatureMap, layer: &ConvLayerParams) -> Vec<f64> {
    let (cin, cout, k, p) = (layer.in_channels, layer.out_channels, layer.kernel_size, layer.padding);
    let len = x.length();
    let out_len = len + 2 * p - k + 1;
    let mut out = vec![0.0; cout * out_len];
    for o in 0..cout {
        for t in 0..out_len {
            let mut acc = layer.bias[o];
            for i in 0..cin {
                for j in 0..k {
                    let s = t as isize + j as isize - p as isize;
                    if s >= 0 && (s as usize) < len {
                        acc += layer.weights[(o * cin + i) * k + j] * x.channel(i)[s as usize];
                    }
                }
            }
            out[o * out_len + t] = acc;
        }
    }
    out
}

/// Scatter definition: every input sample spreads its kernel over the full
/// output, which is then cropped by `p` at both ends.
pub fn conv_transpose1d_direct(x: &FeatureMap, layer: &ConvLayerParams) -> Vec<f64> {
    let (cin, cout, k, p) = (layer.in_channels, layer.out_channels, layer.kernel_size, layer.padding);
    let len = x.length();
    let full = len + k - 1;
    let out_len = full - 2 * p;
    let mut out = vec![0.0; cout * out_len];
    for o in 0..cout {
        let mut acc = vec![0.0; full];
        for i in 0..cin {
            for t in 0..len {
                for j in 0..k {
                    acc[t + j] += layer.weights[(i * cout + o) * k + j] * x.channel(i)[t];
                }
            }
        }
        for s in 0..out_len {
            out[o * out_len + s] = acc[s + p] + layer.bias[o];
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst deviation of both conv ops from their direct sums, including the
/// model's real layer shapes.
pub fn conv_oracle_error(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    let mut shapes: Vec<(usize, usize, usize, usize, usize)> = vec![
        (1, 8, 150, 20, 288),
        (8, 8, 75, 10, 179),
        (8, 8, 50, 0, 125),
        (8, 8, 50, 0, 76),
        (8, 8, 75, 10, 125),
        (8, 1, 150, 20, 179),
    ];
    for _ in 0..trials {
        let (cin, cout, k, p, _) = random_shape(&mut rng);
        let len = rng.random_range(k.max(2)..=40);
        shapes.push((cin, cout, k, p, len));
    }
    for (cin, cout, k, p, len) in shapes {
        let layer = random_layer(&mut rng, cin, cout, k, p);
        let x = random_map(&mut rng, cin, len);
        if len + 2 * p >= k {
            let fast = conv1d_forward(&x, &layer).unwrap();
            worst = worst.max(max_abs_diff(fast.values(), &conv1d_direct(&x, &layer)));
        }
        if len + k - 1 > 2 * p {
            let fast = conv_transpose1d_forward(&x, &layer).unwrap();
            worst = worst.max(max_abs_diff(fast.values(), &conv_transpose1d_direct(&x, &layer)));
        }
    }
    worst
}

/// `<conv(x), y> - <x, conv_transpose(y)>` with zero bias, relative to the
/// magnitude of the terms.
pub fn adjoint_error(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (cin, cout, k, p, _) = random_shape(&mut rng);
        let len = rng.random_range(k.max(2 * p + 1).max(2)..=40);
        let mut layer = random_layer(&mut rng, cin, cout, k, p);
        layer.bias.fill(0.0);
        // the transpose maps cout channels back to cin with the same buffer
        let transpose = ConvLayerParams {
            in_channels: cout,
            out_channels: cin,
            bias: vec![0.0; cin],
            ..layer.clone()
        };
        let x = random_map(&mut rng, cin, len);
        let ax = conv1d_forward(&x, &layer).unwrap();
        let y = random_map(&mut rng, cout, ax.length());
        let aty = conv_transpose1d_forward(&y, &transpose).unwrap();
        let lhs = inner(&ax, &y);
        let rhs = inner(&x, &aty);
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, v)| {
                    let angle = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

/// Worst absolute deviation of the FFT from the naive DFT for every power of
/// two up to `max_n`.
pub fn fft_oracle_error(max_n: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    let mut n = 1;
    while n <= max_n {
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let fast = fft(&x).unwrap();
        let slow = naive_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).norm());
        }
        n *= 2;
    }
    worst
}

/// Ordinary least squares with an intercept, solved by nalgebra's SVD.
pub fn ols_fit_predict(x: &[Vec<f64>], y: &[Vec<f64>], query: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, p, q) = (x.len(), x[0].len(), y[0].len());
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let targets = DMatrix::from_fn(n, q, |i, j| y[i][j]);
    let coef = design.svd(true, true).solve(&targets, 1e-14).unwrap();
    query
        .iter()
        .map(|row| {
            (0..q)
                .map(|j| coef[(0, j)] + (0..p).map(|i| row[i] * coef[(i + 1, j)]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// PLS with as many components as input columns against OLS, on training
/// and fresh points.
pub fn pls_oracle_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (n, p, q) = (80, 12, 6);
    let x: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, p)).collect();
    let b: Vec<Vec<f64>> = (0..p).map(|_| random_vec(&mut rng, q)).collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            (0..q)
                .map(|j| 0.3 + (0..p).map(|i| row[i] * b[i][j]).sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let query: Vec<Vec<f64>> = x.iter().cloned().chain((0..10).map(|_| random_vec(&mut rng, p))).collect();
    let model = pls_train(&x, &y, p).unwrap();
    let expected = ols_fit_predict(&x, &y, &query);
    let mut worst: f64 = 0.0;
    for (row, e) in query.iter().zip(&expected) {
        worst = worst.max(max_abs_diff(&model.predict(row).unwrap(), e));
    }
    worst
}

/// Random coverings of a span; returns the worst deviation of the fused
/// signal from a per-sample average computed independently.
pub fn fusion_oracle_error(trials: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n_segs = rng.random_range(1..=12);
        let mut segs: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut reach = 0;
        for _ in 0..n_segs {
            // each segment starts inside what is already covered
            let start = if reach == 0 { 0 } else { rng.random_range(0..reach) };
            let len = rng.random_range(1..=20);
            reach = reach.max(start + len);
            segs.push((start, random_vec(&mut rng, len)));
        }
        let borrowed: Vec<(usize, &[f64])> = segs.iter().map(|(s, v)| (*s, v.as_slice())).collect();
        let fused = fuse_at_offsets(&borrowed).unwrap();
        assert_eq!(fused.len(), reach);
        for (t, f) in fused.iter().enumerate() {
            let mut sum = 0.0;
            let mut count = 0;
            for (s, v) in &segs {
                if t >= *s && t < s + v.len() {
                    sum += v[t - s];
                    count += 1;
                }
            }
            worst = worst.max((f - sum / count as f64).abs());
        }
    }
    worst
}
