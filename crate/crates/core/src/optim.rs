//! First-order parameter updates.

use serde::{Deserialize, Serialize};

use crate::nn::NetworkParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    GradientDescent,
    /// Adam: bias-corrected first and second moment estimates.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn gradient_descent(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::GradientDescent,
            learning_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &NetworkParams) -> Result<Self> {
        config.validate()?;
        let (first_moment, second_moment) = match config.kind {
            OptimizerKind::GradientDescent => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = params.param_slices().map(|s| vec![0.0; s.len()]).collect();
                (zeros.clone(), zeros)
            }
        };
        Ok(OptimizerState {
            config,
            first_moment,
            second_moment,
            step_count: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Clears moments and the step counter.
    pub fn reset(&mut self) {
        for buf in self.first_moment.iter_mut().chain(self.second_moment.iter_mut()) {
            buf.fill(0.0);
        }
        self.step_count = 0;
    }

    /// Updates `params` in place from `grads`.
    pub fn apply(&mut self, params: &mut NetworkParams, grads: &NetworkParams) -> Result<()> {
        if !params.same_shape(grads) {
            return Err(Error::usage("gradient shape does not match the parameters"));
        }
        for (k, g) in grads.param_slices().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model(format!("non-finite gradient in layer {}", k / 2)));
            }
        }
        self.step_count += 1;
        let lr = self.config.learning_rate;
        match self.config.kind {
            OptimizerKind::GradientDescent => {
                for (p, g) in params.param_slices_mut().zip(grads.param_slices()) {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= lr * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig {
                    beta1, beta2, epsilon, ..
                } = self.config;
                let t = self.step_count as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let buffers = self.first_moment.iter_mut().zip(self.second_moment.iter_mut());
                for ((p, g), (m, v)) in params.param_slices_mut().zip(grads.param_slices()).zip(buffers) {
                    for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *pi -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
