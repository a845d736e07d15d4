use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, RmsPropConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gail,
    Infogail,
    BurnInfogail,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gail => "gail",
            Algorithm::Infogail => "infogail",
            Algorithm::BurnInfogail => "burn_infogail",
        }
    }

    pub fn uses_codes(self) -> bool {
        self != Algorithm::Gail
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "gail" => Ok(Algorithm::Gail),
            "infogail" => Ok(Algorithm::Infogail),
            "burn_infogail" => Ok(Algorithm::BurnInfogail),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected gail, infogail or burn_infogail)"
            ))),
        }
    }
}

/// How the training code is drawn from the burn-in inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeSampling {
    /// Sample from the averaged per-pair posterior.
    Sampled,
    /// Use the majority vote.
    Voted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Weight of the code-marginal entropy.
    pub lambda: f64,
    /// Weight of the style reward `log q(z | s, a)`.
    pub eta: f64,
    pub gamma: f64,
    pub horizon: usize,
    /// Minimum policy steps collected per iteration.
    pub rollout_steps: usize,
    pub critic_updates: usize,
    pub critic_batch: usize,
    pub inference_updates: usize,
    pub inference_batch: usize,
    /// Burn-ins in the Monte-Carlo estimate of the code marginal.
    pub entropy_burn_ins: usize,
    pub clip: f64,
    pub iterations: usize,
    pub code_sampling: CodeSampling,
    pub checkpoint_every: usize,
    pub adam: AdamConfig,
    pub rmsprop: RmsPropConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::BurnInfogail,
            lambda: 500.0,
            eta: 1.0,
            gamma: 0.99,
            horizon: 200,
            rollout_steps: 4000,
            critic_updates: 5,
            critic_batch: 256,
            inference_updates: 1,
            inference_batch: 1024,
            entropy_burn_ins: 64,
            clip: 0.01,
            iterations: 500,
            code_sampling: CodeSampling::Sampled,
            checkpoint_every: 25,
            adam: AdamConfig::default(),
            rmsprop: RmsPropConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be >= 0"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", "must be >= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        for (name, v) in [
            ("rollout_steps", self.rollout_steps),
            ("critic_batch", self.critic_batch),
            ("inference_batch", self.inference_batch),
            ("entropy_burn_ins", self.entropy_burn_ins),
            ("checkpoint_every", self.checkpoint_every),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be >= 1"));
            }
        }
        if !(self.clip > 0.0) {
            return Err(Error::invalid("clip", "must be > 0"));
        }
        Ok(())
    }
}
