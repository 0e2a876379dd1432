//! Downsampling to 30 Hz: a zero-phase windowed-sinc low-pass followed by
//! linear interpolation onto the target grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

/// Anti-aliasing cutoff (the -6 dB point of the filter).
pub const CUTOFF_HZ: f64 = 13.0;
/// Transition band width of the Blackman-windowed sinc.
const TRANSITION_HZ: f64 = 1.5;

/// Odd-length, unit-DC-gain low-pass taps.
pub fn lowpass_taps(fs: f64, cutoff_hz: f64) -> Vec<f64> {
    // Blackman: transition width ~ 5.5 fs / N
    let mut n = (5.5 * fs / TRANSITION_HZ).ceil() as usize;
    if n % 2 == 0 {
        n += 1;
    }
    let half = (n / 2) as f64;
    let fc = cutoff_hz / fs;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let m = i as f64 - half;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            let x = 2.0 * PI * i as f64 / (n - 1) as f64;
            let window = 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Centered (zero-phase) FIR filtering. The signal is extended at both ends
/// by point reflection (`2 x[0] - x[i]`), which keeps level and slope
/// continuous across the boundary.
pub fn filter_zero_phase(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let half = taps.len() / 2;
    let last = n - 1;
    let extend = |i: isize| -> f64 {
        if i < 0 {
            let k = ((-i) as usize).min(last);
            2.0 * signal[0] - signal[k]
        } else if i as usize > last {
            let k = (i as usize - last).min(last);
            2.0 * signal[last] - signal[last - k]
        } else {
            signal[i as usize]
        }
    };
    let extended: Vec<f64> = (-(half as isize)..(n + half) as isize).map(extend).collect();
    (0..n)
        .map(|i| {
            taps.iter()
                .zip(&extended[i..i + taps.len()])
                .map(|(t, x)| t * x)
                .sum()
        })
        .collect()
}

/// Linear interpolation of `signal` (rate `fs_in`) at times `j / fs_out`.
pub fn interpolate_linear(signal: &[f64], fs_in: f64, fs_out: f64) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let n_out = ((n as f64) * fs_out / fs_in).round().max(1.0) as usize;
    (0..n_out)
        .map(|j| {
            let pos = j as f64 * fs_in / fs_out;
            let i = pos.floor() as usize;
            if i + 1 >= n {
                return signal[n - 1];
            }
            let frac = pos - i as f64;
            signal[i] + frac * (signal[i + 1] - signal[i])
        })
        .collect()
}

pub fn resample_to_30hz(signal: &[f64], fs_in: f64) -> Result<Vec<f64>> {
    if !(fs_in.is_finite() && fs_in >= SAMPLE_RATE_HZ) {
        return Err(Error::UnsupportedUpsample { fs_in });
    }
    if fs_in == SAMPLE_RATE_HZ {
        return Ok(signal.to_vec());
    }
    let taps = lowpass_taps(fs_in, CUTOFF_HZ);
    let filtered = filter_zero_phase(signal, &taps);
    Ok(interpolate_linear(&filtered, fs_in, SAMPLE_RATE_HZ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, seconds: f64) -> Vec<f64> {
        let n = (fs * seconds) as usize;
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn identity_at_30hz() {
        let x = tone(1.0, 30.0, 5.0);
        assert_eq!(resample_to_30hz(&x, 30.0).unwrap(), x);
    }

    #[test]
    fn rejects_upsampling() {
        assert!(matches!(
            resample_to_30hz(&[1.0, 2.0], 25.0),
            Err(Error::UnsupportedUpsample { .. })
        ));
    }

    #[test]
    fn one_hz_tone_survives() {
        let x = tone(1.0, 125.0, 20.0);
        let y = resample_to_30hz(&x, 125.0).unwrap();
        assert_eq!(y.len(), 600);
        let expected = tone(1.0, 30.0, 20.0);
        let max_err = y
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.01, "max error {max_err}");
    }

    #[test]
    fn fourteen_hz_tone_is_attenuated() {
        let x = tone(14.0, 125.0, 20.0);
        let y = resample_to_30hz(&x, 125.0).unwrap();
        // skip the reflected edges
        let core = &y[60..y.len() - 60];
        let db = 20.0 * (rms(core) / rms(&x)).log10();
        assert!(db < -20.0, "attenuation {db} dB");
    }

    #[test]
    fn duration_is_preserved() {
        for (fs, secs) in [(125.0, 480.0), (300.0, 10.0), (100.0, 3.3)] {
            let n = (fs * secs) as usize;
            let y = resample_to_30hz(&vec![0.5; n], fs).unwrap();
            let dur_in = n as f64 / fs;
            let dur_out = y.len() as f64 / 30.0;
            assert!((dur_in - dur_out).abs() <= 1.0 / 30.0);
            assert!(y.iter().all(|v| (v - 0.5).abs() < 1e-12));
        }
    }
}
