//! Diagonal Gaussian and categorical distribution utilities.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Lower clamp applied to probabilities inside logarithms.
pub const PROB_EPS: f64 = 1e-8;

/// Log density of a diagonal Gaussian and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLogProb {
    pub value: f64,
    pub d_action: Vec<f64>,
    pub d_mean: Vec<f64>,
    pub d_log_sigma: Vec<f64>,
}

pub fn gaussian_logprob(action: &[f64], mean: &[f64], sigma: &[f64]) -> Result<GaussianLogProb> {
    if action.len() != mean.len() || sigma.len() != mean.len() {
        return Err(Error::shape("gaussian_logprob", mean.len(), action.len().max(sigma.len())));
    }
    if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("sigma", format!("must be > 0, got {s}")));
    }
    let mut value = 0.0;
    let n = mean.len();
    let (mut d_action, mut d_mean, mut d_log_sigma) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let z = (action[i] - mean[i]) / sigma[i];
        value += -0.5 * z * z - sigma[i].ln() - 0.5 * (2.0 * PI).ln();
        d_mean[i] = z / sigma[i];
        d_action[i] = -d_mean[i];
        d_log_sigma[i] = z * z - 1.0;
    }
    Ok(GaussianLogProb {
        value,
        d_action,
        d_mean,
        d_log_sigma,
    })
}

/// Log density from log standard deviations, without gradients.
pub fn gaussian_logprob_value(action: &[f64], mean: &[f64], log_sigma: &[f64]) -> f64 {
    let mut v = 0.0;
    for i in 0..mean.len() {
        let z = (action[i] - mean[i]) * (-log_sigma[i]).exp();
        v += -0.5 * z * z - log_sigma[i] - 0.5 * (2.0 * PI).ln();
    }
    v
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Cross-entropy against a hard label. `clamped` reports that the label's
/// probability fell below [`PROB_EPS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub value: f64,
    pub clamped: bool,
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<CrossEntropy> {
    let p = *probs
        .get(label)
        .ok_or_else(|| Error::shape("cross_entropy label", probs.len(), label))?;
    Ok(CrossEntropy {
        value: -p.max(PROB_EPS).ln(),
        clamped: p < PROB_EPS,
    })
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Gradient of [`entropy`] with respect to the probabilities.
pub fn entropy_grad(probs: &[f64]) -> Vec<f64> {
    probs.iter().map(|p| -(p.max(PROB_EPS).ln() + 1.0)).collect()
}

/// Pulls a gradient with respect to softmax outputs back to the logits.
pub fn softmax_vjp(probs: &[f64], grad: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad).map(|(p, g)| p * (g - dot)).collect()
}

/// Gradient of `-log softmax(logits)[label]` with respect to the logits.
pub fn cross_entropy_logit_grad(probs: &[f64], label: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}
