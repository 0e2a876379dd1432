use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How PPG input windows are scaled before entering the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputScaling {
    /// Per-window zero mean, unit variance.
    #[default]
    ZScore,
    /// Samples passed through unchanged.
    Raw,
}

/// Min-max scaling of a whole reference recording onto `[0, 1]`.
pub fn normalize_target(signal: &[f64]) -> Result<Vec<f64>> {
    let (min, max) = signal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if signal.is_empty() || !(max > min) {
        return Err(Error::DegenerateSignal(
            "reference signal is constant or empty".into(),
        ));
    }
    let range = max - min;
    Ok(signal.iter().map(|&v| (v - min) / range).collect())
}

/// Per-window z-score (population standard deviation).
pub fn normalize_input(window: &[f64]) -> Result<Vec<f64>> {
    let n = window.len() as f64;
    if window.is_empty() {
        return Err(Error::DegenerateWindow);
    }
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::DegenerateWindow);
    }
    Ok(window.iter().map(|v| (v - mean) / std).collect())
}

pub fn scale_input(window: &[f64], scaling: InputScaling) -> Result<Vec<f64>> {
    match scaling {
        InputScaling::ZScore => normalize_input(window),
        InputScaling::Raw => Ok(window.to_vec()),
    }
}
