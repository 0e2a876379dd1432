//! Respiratory waveform estimation from photoplethysmography.
//!
//! A small convolutional encoder-decoder maps 9.6 s PPG windows sampled at
//! 30 Hz onto normalized respiratory reference waveforms. The crate holds
//! the differentiation kernels, the model, data ingestion and synthesis,
//! training, evaluation (waveform error, respiratory rate, duty cycle and a
//! PLS baseline) and kernel attribution.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod interpret;
pub mod model;
pub mod nn;
pub mod seed;
pub mod training;

pub use error::{Error, ErrorKind, Result};

/// Sampling rate every signal is brought to on ingestion.
pub const SAMPLE_RATE_HZ: f64 = 30.0;
