use crate::error::{CoreError, Result};
use crate::numerics::Matrix;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: bias-corrected first and second moment estimates, one
/// accumulator per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new(params: &[Matrix], config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
            second: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over all parameter tensors.
    ///
    /// Non-finite gradients abort with a diagnostic naming the offending
    /// tensor; parameters are checked after the update as well.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "adam: {} params, {} grads, state holds {}",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (idx, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(CoreError::Numerical(format!(
                    "adam: non-finite gradient in tensor {idx} at step {}",
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bias1 = 1.0 - beta1.powf(t);
        let bias2 = 1.0 - beta2.powf(t);

        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            assert_eq!(
                (param.rows(), param.cols()),
                (grad.rows(), grad.cols()),
                "adam tensor shape mismatch"
            );
            for k in 0..param.data().len() {
                let g = grad.data()[k];
                let mk = beta1 * m.data()[k] + (1.0 - beta1) * g;
                let vk = beta2 * v.data()[k] + (1.0 - beta2) * g * g;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let m_hat = mk / bias1;
                let v_hat = vk / bias2;
                param.data_mut()[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
            if !param.is_finite() {
                return Err(CoreError::Numerical(format!(
                    "adam: parameters became non-finite at step {}",
                    self.step
                )));
            }
        }
        Ok(())
    }
}
