//! Iterative radix-2 Cooley-Tukey FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Precomputed twiddles and bit-reversal table for one power-of-two size.
#[derive(Debug, Clone)]
pub struct Radix2Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!("FFT size {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // e^{-2 pi i k / n}, each computed directly for accuracy
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform in place: `X[k] = sum_j x[j] e^{-2 pi i jk / n}`.
    pub fn process(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n, "buffer length must match the plan");
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= self.n {
            let half = size / 2;
            let stride = self.n / size;
            for start in (0..self.n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

/// Forward FFT of a real or complex sequence whose length is a power of two.
pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = Radix2Fft::new(input.len())?;
    let mut buf = input.to_vec();
    plan.process(&mut buf);
    Ok(buf)
}
