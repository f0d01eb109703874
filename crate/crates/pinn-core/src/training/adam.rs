//! Bias-corrected Adam over a flat parameter vector.

use super::TrainingError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let in_unit = |v: f64| (0.0..1.0).contains(&v);
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(TrainingError::InvalidConfig {
                field: "adam".to_string(),
                message: format!("betas must lie in [0, 1), got ({}, {})", self.beta1, self.beta2),
            });
        }
        if !(self.eps > 0.0) {
            return Err(TrainingError::InvalidConfig {
                field: "adam.eps".to_string(),
                message: format!("must be positive, got {}", self.eps),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize, params: AdamParams) -> AdamState {
        AdamState {
            params,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// One update θ ← θ − lr·m̂/(√v̂ + ε) with bias-corrected moments.
    pub fn step(
        &mut self,
        theta: &mut [f64],
        grad: &[f64],
        lr: f64,
    ) -> Result<(), TrainingError> {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(TrainingError::Diverged {
                detail: format!("non-finite gradient component at index {i}"),
            });
        }
        self.step += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
