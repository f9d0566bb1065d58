//! Adam with bias correction over a flat vector of trainable scalars.
//!
//! Only trainable entries are ever part of the vector, so masked-off weights
//! cannot move.

use serde::{Deserialize, Serialize};

use crate::block::WeightSpace;
use crate::error::{input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 norm ceiling applied to the whole gradient before the update.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One update. `grad` is clipped in place when a ceiling is configured.
    pub fn update(&mut self, params: &mut [f64], grad: &mut [f64], cfg: &AdamConfig) -> Result<()> {
        if params.len() != self.len() || grad.len() != self.len() {
            return input(format!(
                "adam state holds {} entries, got {} params and {} grads",
                self.len(),
                params.len(),
                grad.len()
            ));
        }
        if let Some(c) = cfg.clip_norm {
            clip_global_norm(grad, c);
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}

/// Applies one Adam update to the trainable entries and biases of `ws`.
pub fn adam_step(ws: &mut WeightSpace, grads: &WeightSpace, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let mut p = ws.params();
    let mut g = grads.params();
    state.update(&mut p, &mut g, cfg)?;
    ws.set_params(&p)
}
