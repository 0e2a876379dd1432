//! Respiratory rate from the dominant spectral peak, and duty cycle.

use num_complex::Complex64;

use super::fft::Radix2Fft;
use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

pub const DEFAULT_BAND_BPM: (f64, f64) = (4.0, 65.0);
pub const DEFAULT_PAD_TO: usize = 16_384;

/// Reusable FFT-based rate estimator (the twiddle table is built once).
#[derive(Debug, Clone)]
pub struct RrEstimator {
    sample_rate: f64,
    band_bpm: (f64, f64),
    pad_to: usize,
    plan: Radix2Fft,
}

impl Default for RrEstimator {
    fn default() -> Self {
        Self::new(SAMPLE_RATE_HZ, DEFAULT_BAND_BPM, DEFAULT_PAD_TO).expect("valid defaults")
    }
}

impl RrEstimator {
    pub fn new(sample_rate: f64, band_bpm: (f64, f64), pad_to: usize) -> Result<Self> {
        if !(sample_rate > 0.0) || !(band_bpm.0 < band_bpm.1) || band_bpm.0 < 0.0 {
            return Err(Error::Parameter(format!(
                "invalid rate estimator settings: fs {sample_rate}, band {band_bpm:?}"
            )));
        }
        Ok(Self {
            sample_rate,
            band_bpm,
            pad_to,
            plan: Radix2Fft::new(pad_to)?,
        })
    }

    pub fn bin_width_bpm(&self) -> f64 {
        60.0 * self.sample_rate / self.pad_to as f64
    }

    /// Mean-subtract, zero-pad, and return 60x the frequency of the largest
    /// magnitude bin inside the band (lowest bin on ties).
    pub fn estimate(&self, waveform: &[f64]) -> Result<f64> {
        let min_len = (2.0 * self.sample_rate).ceil() as usize;
        if waveform.len() < min_len {
            return Err(Error::Parameter(format!(
                "need at least 2 s ({min_len} samples) for a rate estimate, got {}",
                waveform.len()
            )));
        }
        let n = waveform.len();
        let mean = waveform.iter().sum::<f64>() / n as f64;
        let scale = waveform.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        if waveform.iter().all(|v| (v - mean).abs() <= 1e-12 * scale) {
            return Err(Error::NoPeak);
        }

        let padded_len = if n > self.pad_to { n.next_power_of_two() } else { self.pad_to };
        let local_plan;
        let plan = if padded_len == self.pad_to {
            &self.plan
        } else {
            local_plan = Radix2Fft::new(padded_len)?;
            &local_plan
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); padded_len];
        for (b, &v) in buf.iter_mut().zip(waveform) {
            b.re = v - mean;
        }
        plan.process(&mut buf);

        let hz_per_bin = self.sample_rate / padded_len as f64;
        let lo = (self.band_bpm.0 / 60.0 / hz_per_bin).ceil() as usize;
        let hi = ((self.band_bpm.1 / 60.0 / hz_per_bin).floor() as usize).min(padded_len / 2);
        let mut best = None::<(usize, f64)>;
        for (k, v) in buf.iter().enumerate().take(hi + 1).skip(lo) {
            let mag = v.norm_sqr();
            if best.is_none_or(|(_, m)| mag > m) {
                best = Some((k, mag));
            }
        }
        match best {
            Some((k, mag)) if mag > 0.0 => Ok(60.0 * k as f64 * hz_per_bin),
            _ => Err(Error::NoPeak),
        }
    }
}

pub fn estimate_rr_fft(waveform: &[f64], sample_rate: f64, band_bpm: (f64, f64), pad_to: usize) -> Result<f64> {
    RrEstimator::new(sample_rate, band_bpm, pad_to)?.estimate(waveform)
}

/// Percentage of samples strictly below 0.5 (0 for an empty waveform).
pub fn duty_cycle(waveform: &[f64]) -> f64 {
    if waveform.is_empty() {
        return 0.0;
    }
    100.0 * waveform.iter().filter(|&&v| v < 0.5).count() as f64 / waveform.len() as f64
}
