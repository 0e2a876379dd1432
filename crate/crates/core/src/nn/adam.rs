use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyperparameters. The learning rate is passed per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    pub fn config(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn reset(&mut self) {
        self.first_moment.fill(0.0);
        self.second_moment.fill(0.0);
        self.step_count = 0;
    }
}

/// One bias-corrected Adam update. `layer` only labels the error when a
/// gradient is not finite; parameters are left untouched in that case.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    learning_rate: f64,
    layer: usize,
) -> Result<()> {
    if params.len() != grads.len()
        || state.first_moment.len() != params.len()
        || state.second_moment.len() != params.len()
    {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {}/{} moments",
            params.len(),
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { layer });
    }
    state.step_count += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let t = state.step_count as i32;
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
