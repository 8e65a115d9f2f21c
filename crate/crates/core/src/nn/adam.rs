use serde::{Deserialize, Serialize};

use super::{GradientTape, Real};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state: first and second moments per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    config: AdamConfig,
    first: Vec<Vec<F>>,
    second: Vec<Vec<F>>,
    step: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            first: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            second: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn for_params(config: AdamConfig, params: &[&[F]]) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected Adam update:
    /// `θ ← θ − lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, mut params: Vec<&mut [F]>, tape: &GradientTape<F>) -> Result<()> {
        let grads = tape.buffers();
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::State("parameter and gradient shapes differ".into()));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let correction1 = F::from_f64_lossy(1.0 - c.beta1.powi(t));
        let correction2 = F::from_f64_lossy(1.0 - c.beta2.powi(t));
        let (b1, b2) = (F::from_f64_lossy(c.beta1), F::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (F::from_f64_lossy(1.0 - c.beta1), F::from_f64_lossy(1.0 - c.beta2));
        let lr = F::from_f64_lossy(c.learning_rate);
        let eps = F::from_f64_lossy(c.epsilon);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.first[i], &mut self.second[i], &grads[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + one_b1 * g[j];
                v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
