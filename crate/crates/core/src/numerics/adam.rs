use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First/second moment estimates for one parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    name: String,
    rows: usize,
    cols: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, config: AdamConfig) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            m: vec![0.0; rows * cols],
            v: vec![0.0; rows * cols],
            step: 0,
            config,
        }
    }

    pub fn for_matrix(name: impl Into<String>, m: &Matrix, config: AdamConfig) -> Self {
        Self::new(name, m.rows(), m.cols(), config)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// The gradient is validated before anything is touched, so a rejected step
/// leaves both `params` and `state` unchanged.
pub fn adam_step(params: &mut Matrix, grads: &Matrix, state: &mut AdamState) -> Result<()> {
    if params.shape() != grads.shape() || params.shape() != (state.rows, state.cols) {
        return Err(Error::Shape {
            op: "adam_step",
            left: params.shape_str(),
            right: format!("grads {} / state {}x{}", grads.shape_str(), state.rows, state.cols),
        });
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite(format!("gradient of {}", state.name)));
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (((p, &g), m), v) in params
        .data_mut()
        .iter_mut()
        .zip(grads.data())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
