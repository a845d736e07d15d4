use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(params: &[f64], grads: &[f64], context: &'static str) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(context, params.len(), grads.len()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { context });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state for a flat parameter vector. Steps descend the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check(params, grads, "adam gradient")?;
        if self.m.len() != params.len() {
            return Err(Error::shape("adam state", self.m.len(), params.len()));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            decay: 0.9,
            eps: 1e-8,
        }
    }
}

/// RMSProp without momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    pub sq: Vec<f64>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, n: usize) -> Self {
        Self {
            config,
            sq: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check(params, grads, "rmsprop gradient")?;
        if self.sq.len() != params.len() {
            return Err(Error::shape("rmsprop state", self.sq.len(), params.len()));
        }
        let RmsPropConfig { lr, decay, eps } = self.config;
        for ((p, &g), s) in params.iter_mut().zip(grads).zip(&mut self.sq) {
            *s = decay * *s + (1.0 - decay) * g * g;
            *p -= lr * g / (s.sqrt() + eps);
        }
        Ok(())
    }
}

/// Clamps every entry to `[-c, c]`.
pub fn clip_weights(params: &mut [f64], c: f64) {
    for p in params {
        *p = p.clamp(-c, c);
    }
}
