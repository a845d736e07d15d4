use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CODE_DIM, PAIR_DIM};
use crate::error::{Error, Result};
use crate::numerics::{softmax, Activation, Checkpoint, Layer, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { hidden: 64 }
    }
}

fn layers(cfg: &NetConfig, out: usize) -> Vec<Layer> {
    vec![
        Layer::new(PAIR_DIM, cfg.hidden, Activation::Tanh),
        Layer::new(cfg.hidden, cfg.hidden, Activation::Tanh),
        Layer::new(cfg.hidden, out, Activation::Identity),
    ]
}

/// Wasserstein critic: real-valued score of a state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub net: Mlp,
}

impl Critic {
    pub fn init<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            net: Mlp::init(layers(cfg, 1), rng)?,
        })
    }

    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        Ok(Self {
            net: Mlp::zeros(layers(cfg, 1))?,
        })
    }

    pub fn scores(&self, pairs: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.net.predict(pairs)?.column(0).to_vec())
    }
}

/// Softplus of a critic score, computed as `max(s, 0) + ln(1 + e^-|s|)`.
pub fn surrogate_reward(score: f64) -> f64 {
    score.max(0.0) + (-score.abs()).exp().ln_1p()
}

const LOGIT_INIT_SCALE: f64 = 0.01;

/// Style classifier over state-action pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub net: Mlp,
}

/// Trajectory-level inference result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryInference {
    pub avg_posterior: [f64; CODE_DIM],
    pub vote: usize,
}

impl Inference {
    /// The logit layer starts near zero so the initial posterior is close
    /// to uniform on every input.
    pub fn init<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<Self> {
        let mut net = Mlp::init(layers(cfg, CODE_DIM), rng)?;
        let n = net.n_params();
        let last = n - CODE_DIM * (cfg.hidden + 1);
        net.params_mut()[last..n].iter_mut().for_each(|w| *w *= LOGIT_INIT_SCALE);
        Ok(Self { net })
    }

    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        Ok(Self {
            net: Mlp::zeros(layers(cfg, CODE_DIM))?,
        })
    }

    pub fn logits(&self, pairs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.predict(pairs)
    }

    /// Per-pair posteriors, one row per pair.
    pub fn posteriors(&self, pairs: ArrayView2<f64>) -> Result<Vec<[f64; CODE_DIM]>> {
        Ok(self.logits(pairs)?.rows().into_iter().map(|r| to_simplex(&r.to_vec())).collect())
    }

    pub fn infer_trajectory(&self, pairs: ArrayView2<f64>) -> Result<TrajectoryInference> {
        aggregate(&self.posteriors(pairs)?)
    }
}

pub(crate) fn to_simplex(logits: &[f64]) -> [f64; CODE_DIM] {
    let p = softmax(logits);
    [p[0], p[1], p[2], p[3]]
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Averages per-pair posteriors and takes the majority vote of their
/// argmaxes. Vote ties go to the larger average posterior, then the lower
/// index.
pub fn aggregate(posteriors: &[[f64; CODE_DIM]]) -> Result<TrajectoryInference> {
    if posteriors.is_empty() {
        return Err(Error::Empty("infer_trajectory"));
    }
    let mut avg = [0.0; CODE_DIM];
    let mut votes = [0usize; CODE_DIM];
    for p in posteriors {
        for k in 0..CODE_DIM {
            avg[k] += p[k];
        }
        votes[argmax(p)] += 1;
    }
    let n = posteriors.len() as f64;
    avg.iter_mut().for_each(|a| *a /= n);
    let mut vote = 0;
    for k in 1..CODE_DIM {
        if votes[k] > votes[vote] || (votes[k] == votes[vote] && avg[k] > avg[vote]) {
            vote = k;
        }
    }
    Ok(TrajectoryInference {
        avg_posterior: avg,
        vote,
    })
}

pub(crate) fn save_net(ckpt: &mut Checkpoint, name: &str, net: &Mlp) -> Result<()> {
    ckpt.push(name, &[net.n_params()], net.params())
}

pub(crate) fn load_net(ckpt: &Checkpoint, name: &str, net: &mut Mlp) -> Result<()> {
    let n = net.n_params();
    net.set_params(ckpt.expect(name, &[n])?)
}
