use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::feature_map::FeatureMap;
use crate::error::{Error, Result};

/// A reproducible keep/drop pattern for inverted dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep_probability: f64,
    mask: Vec<bool>,
    rng_seed: u64,
}

impl DropoutMask {
    pub fn generate(len: usize, keep_probability: f64, rng_seed: u64) -> Result<Self> {
        check_keep(keep_probability)?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mask = if keep_probability >= 1.0 {
            vec![true; len]
        } else {
            (0..len)
                .map(|_| rng.random::<f64>() < keep_probability)
                .collect()
        };
        Ok(Self {
            keep_probability,
            mask,
            rng_seed,
        })
    }

    pub fn from_mask(mask: Vec<bool>, keep_probability: f64) -> Result<Self> {
        check_keep(keep_probability)?;
        Ok(Self {
            keep_probability,
            mask,
            rng_seed: 0,
        })
    }

    pub fn keep_probability(&self) -> f64 {
        self.keep_probability
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    fn scale(&self, x: &FeatureMap) -> Result<FeatureMap> {
        if self.mask.len() != x.values().len() {
            return Err(Error::Shape(format!(
                "dropout mask has {} entries, activation has {}",
                self.mask.len(),
                x.values().len()
            )));
        }
        let inv = 1.0 / self.keep_probability;
        let values = x
            .values()
            .iter()
            .zip(&self.mask)
            .map(|(&v, &keep)| if keep { v * inv } else { 0.0 })
            .collect();
        FeatureMap::new(x.channels(), x.length(), values)
    }
}

fn check_keep(keep_probability: f64) -> Result<()> {
    if !(keep_probability > 0.0 && keep_probability <= 1.0) {
        return Err(Error::Parameter(format!(
            "keep probability must be in (0, 1], got {keep_probability}"
        )));
    }
    Ok(())
}

/// Inverted dropout. In inference mode the input is returned unchanged.
pub fn dropout_apply(input: &FeatureMap, mask: &DropoutMask, training: bool) -> Result<FeatureMap> {
    check_keep(mask.keep_probability)?;
    if !training {
        return Ok(input.clone());
    }
    mask.scale(input)
}

/// Dropout is linear, so the cotangent is masked and scaled the same way.
pub fn dropout_backward(grad_out: &FeatureMap, mask: &DropoutMask, training: bool) -> Result<FeatureMap> {
    dropout_apply(grad_out, mask, training)
}
