use crate::error::{Error, Result};

/// A multi-channel 1-D signal stored row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    length: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, length: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::Shape(format!(
                "feature map must be non-empty, got {channels}x{length}"
            )));
        }
        if values.len() != channels * length {
            return Err(Error::Shape(format!(
                "expected {} values for {channels}x{length}, got {}",
                channels * length,
                values.len()
            )));
        }
        Ok(Self {
            channels,
            length,
            values,
        })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            values: vec![0.0; channels * length],
        }
    }

    /// Single-channel map holding a copy of `signal`.
    pub fn from_signal(signal: &[f64]) -> Result<Self> {
        Self::new(1, signal.len(), signal.to_vec())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.length..(c + 1) * self.length]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.length..(c + 1) * self.length]
    }

    pub fn get(&self, c: usize, t: usize) -> f64 {
        self.values[c * self.length + t]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean inner product over all entries.
    pub fn dot(&self, other: &FeatureMap) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "dot of {:?} with {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(dot(&self.values, &other.values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeatureMap {
        FeatureMap {
            channels: self.channels,
            length: self.length,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
/// The summation order is fixed, so results are reproducible.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for j in 0..chunks {
        let i = 4 * j;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
