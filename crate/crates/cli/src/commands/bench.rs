use std::path::PathBuf;
use std::time::Instant;

use ppg_resp::data::segment_test;
use ppg_resp::data::{generate_synthetic, SynthConfig};
use ppg_resp::evaluation::quantile;
use ppg_resp::model::{build_model, load_weights, EncoderDecoderModel, ModelConfig};
use ppg_resp::SAMPLE_RATE_HZ;
use serde::Serialize;
use serde_json::json;

use super::Context;
use crate::args::BenchArgs;
use crate::config::pick;
use crate::error::Result;
use crate::run::{write_json, RunDir};

pub const DEFAULT_ITERATIONS: usize = 10_000;
const WARMUP: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub windows_per_s: f64,
    /// Seconds of output waveform per wall-clock second, in hours.
    pub waveform_hours_per_s: f64,
}

/// Times `iterations` single-window inference calls on synthetic windows.
pub fn benchmark(model: &EncoderDecoderModel, iterations: usize, seed: u64) -> Result<BenchReport> {
    let rec = generate_synthetic(&SynthConfig {
        n_subjects: 1,
        duration_s: 60.0,
        seed,
        ..SynthConfig::default()
    })?
    .remove(0);
    let windows: Vec<Vec<f64>> = segment_test(&rec)?.into_iter().map(|s| s.input).collect();
    let mut sink = 0.0;
    for w in windows.iter().cycle().take(WARMUP) {
        sink += model.predict(w)?[0];
    }
    let mut times = Vec::with_capacity(iterations);
    let began = Instant::now();
    for w in windows.iter().cycle().take(iterations) {
        let t = Instant::now();
        sink += model.predict(w)?[0];
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let total = began.elapsed().as_secs_f64();
    log::debug!("checksum {sink}");
    let mean_ms = times.iter().sum::<f64>() / times.len().max(1) as f64;
    let windows_per_s = iterations as f64 / total;
    let window_s = model.config().window as f64 / SAMPLE_RATE_HZ;
    Ok(BenchReport {
        iterations,
        mean_ms,
        p50_ms: quantile(&times, 0.5).unwrap_or(f64::NAN),
        p95_ms: quantile(&times, 0.95).unwrap_or(f64::NAN),
        max_ms: times.iter().copied().fold(f64::NAN, f64::max),
        windows_per_s,
        waveform_hours_per_s: windows_per_s * window_s / 3600.0,
    })
}

pub fn run(args: &BenchArgs, ctx: &Context) -> Result<PathBuf> {
    let iterations = pick(args.iterations, ctx.file.bench.iterations, DEFAULT_ITERATIONS).max(1);
    let seed = pick(args.seed, ctx.file.seed, 0);
    let weights = args.weights.clone().or_else(|| ctx.file.weights.clone());
    let model = match &weights {
        Some(p) => load_weights(p)?,
        None => build_model(&ModelConfig::default(), seed)?,
    };
    let report = benchmark(&model, iterations, seed)?;
    println!(
        "mean {:.4} ms, p95 {:.4} ms, {:.0} windows/s, {:.2} h of waveform per second",
        report.mean_ms, report.p95_ms, report.windows_per_s, report.waveform_hours_per_s
    );
    let run = RunDir::create(&ctx.out, "bench")?;
    write_json(&run.join("bench.json"), &report)?;
    run.finish(
        Some(seed),
        json!({ "weights": weights, "iterations": iterations }),
        &weights.into_iter().collect::<Vec<_>>(),
        json!({ "mean_ms": report.mean_ms }),
    )
}
