use super::feature_map::FeatureMap;
use crate::error::{Error, Result};

/// Mean squared error and its gradient with respect to `prediction`.
pub fn mse_loss(prediction: &FeatureMap, target: &FeatureMap) -> Result<(f64, FeatureMap)> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let n = prediction.values().len() as f64;
    let diff: Vec<f64> = prediction
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| p - t)
        .collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.iter().map(|d| 2.0 * d / n).collect();
    Ok((
        loss,
        FeatureMap::new(prediction.channels(), prediction.length(), grad)?,
    ))
}
