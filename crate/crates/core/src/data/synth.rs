//! Synthetic PPG with a capnography-like reference.
//!
//! Breathing is a rectangular wave (0 during inspiration, 1 during
//! expiration) at a fixed per-subject rate and duty cycle. It modulates the
//! PPG in the three classic ways: baseline intensity, pulse amplitude and
//! pulse interval. The reference is the same rectangular wave lightly
//! smoothed; the modulation signal is a more heavily smoothed copy, since
//! the PPG sees breathing through a low-pass path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::normalize::normalize_target;
use super::recording::{Recording, RespKind, RrAnnotation};
use crate::error::{Error, Result};
use crate::seed::mix_seed;
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub duration_s: f64,
    /// Per-subject heart rate is drawn uniformly from this range.
    pub heart_rate_bpm: (f64, f64),
    pub resp_rate_bpm: (f64, f64),
    /// Fraction of each breath spent in inspiration.
    pub duty_cycle: (f64, f64),
    /// Baseline (intensity) modulation depth.
    pub intensity_depth: f64,
    /// Pulse amplitude modulation depth.
    pub amplitude_depth: f64,
    /// Pulse interval (heart rate) modulation depth.
    pub frequency_depth: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 20,
            duration_s: 480.0,
            heart_rate_bpm: (65.0, 100.0),
            resp_rate_bpm: (8.0, 30.0),
            duty_cycle: (0.3, 0.6),
            intensity_depth: 0.3,
            amplitude_depth: 0.2,
            frequency_depth: 0.05,
            noise_std: 0.02,
            seed: 0,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::Parameter(format!(
            "{name} range ({lo}, {hi}) must be positive and ordered"
        )));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Parameter("n_subjects must be at least 1".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s * SAMPLE_RATE_HZ >= 1.0) {
            return Err(Error::Parameter(format!("invalid duration {}", self.duration_s)));
        }
        check_range("heart_rate_bpm", self.heart_rate_bpm)?;
        check_range("resp_rate_bpm", self.resp_rate_bpm)?;
        check_range("duty_cycle", self.duty_cycle)?;
        if self.duty_cycle.1 >= 1.0 {
            return Err(Error::Parameter("duty cycle must be below 1".into()));
        }
        if self.resp_rate_bpm.1 >= self.heart_rate_bpm.0 / 2.0 {
            return Err(Error::Parameter(format!(
                "respiratory rate up to {} bpm is not below half the heart rate ({} bpm)",
                self.resp_rate_bpm.1, self.heart_rate_bpm.0
            )));
        }
        for (name, d) in [
            ("intensity_depth", self.intensity_depth),
            ("amplitude_depth", self.amplitude_depth),
            ("frequency_depth", self.frequency_depth),
        ] {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Parameter(format!("{name} {d} not in [0, 1)")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Parameter(format!("invalid noise_std {}", self.noise_std)));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Centered moving average over `width` samples (odd), shrinking at edges.
fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn pulse_shape(phase: f64, dicrotic: f64) -> f64 {
    let g = |center: f64, width: f64| (-0.5 * ((phase - center) / width).powi(2)).exp();
    g(0.25, 0.07) + dicrotic * g(0.5, 0.09)
}

/// Parameters drawn for one synthetic subject.
#[derive(Debug, Clone, Copy)]
struct Subject {
    heart_rate: f64,
    resp_rate: f64,
    duty: f64,
    phase: f64,
    intensity: f64,
    amplitude: f64,
    frequency: f64,
    dicrotic: f64,
}

fn draw_subject(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Subject {
    let gain = |rng: &mut ChaCha8Rng, depth: f64| (depth * rng.random_range(0.6..1.4)).min(0.95);
    Subject {
        heart_rate: uniform(rng, config.heart_rate_bpm),
        resp_rate: uniform(rng, config.resp_rate_bpm),
        duty: uniform(rng, config.duty_cycle),
        phase: rng.random::<f64>(),
        intensity: gain(rng, config.intensity_depth),
        amplitude: gain(rng, config.amplitude_depth),
        frequency: gain(rng, config.frequency_depth),
        dicrotic: rng.random_range(0.2..0.5),
    }
}

fn synthesize(config: &SynthConfig, index: usize) -> Result<Recording> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, index as u64));
    let s = draw_subject(config, &mut rng);
    let fs = SAMPLE_RATE_HZ;
    let n = (config.duration_s * fs).round() as usize;
    let breath_hz = s.resp_rate / 60.0;

    // 0 while inspiring, 1 while expiring
    let rect: Vec<f64> = (0..n)
        .map(|i| {
            let psi = (s.phase + i as f64 / fs * breath_hz).fract();
            if psi < s.duty {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let reference = normalize_target(&moving_average(&rect, 7))?;

    let period_s = 1.0 / breath_hz;
    let shortest_phase_s = period_s * s.duty.min(1.0 - s.duty);
    let width = (((0.5f64).min(0.8 * shortest_phase_s) * fs).round() as usize) | 1;
    let modulation: Vec<f64> = moving_average(&rect, width)
        .into_iter()
        .map(|v| 2.0 * v - 1.0)
        .collect();

    let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let mut beat_phase = rng.random::<f64>();
    let mut ppg = Vec::with_capacity(n);
    for &m in &modulation {
        let pulse = pulse_shape(beat_phase, s.dicrotic);
        // Expiration: more venous blood (lower intensity), larger and
        // slower pulses.
        let value = (1.0 + s.amplitude * m) * pulse - s.intensity * m
            + if config.noise_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
        ppg.push(value);
        beat_phase = (beat_phase + s.heart_rate / 60.0 * (1.0 - s.frequency * m) / fs).fract();
    }

    let annotations = (0..=(config.duration_s.floor() as usize))
        .map(|t| RrAnnotation {
            time_s: t as f64,
            rr_bpm: s.resp_rate,
        })
        .collect();
    Recording::new(
        format!("synth{:03}", index + 1),
        fs,
        ppg,
        reference,
        RespKind::Capnography,
        Some(annotations),
    )
}

/// Generates `config.n_subjects` recordings at 30 Hz. Each subject draws
/// from its own seeded stream, so subject `k` does not depend on how many
/// subjects are generated.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<Recording>> {
    config.validate()?;
    (0..config.n_subjects).map(|i| synthesize(config, i)).collect()
}
