//! Policy, critic and inference networks.

mod nets;
mod policy;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use nets::{aggregate, argmax, surrogate_reward, Critic, Inference, NetConfig, TrajectoryInference};
pub use policy::{Policy, PolicyCache, PolicyConfig};

use crate::error::{Error, Result};
use crate::numerics::Checkpoint;
use crate::simulator::{Action, Observation, SimConfig, OBS_DIM};

pub const CODE_DIM: usize = 4;
pub const EMBED_DIM: usize = 16;
pub const ACTION_DIM: usize = 2;
/// Critic and inference input: standardized observation and normalized action.
pub const PAIR_DIM: usize = OBS_DIM + ACTION_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub policy: PolicyConfig,
    pub critic: NetConfig,
    pub inference: NetConfig,
    /// Physical action per unit of normalized action (accel, turn rate).
    pub action_scale: [f64; ACTION_DIM],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            policy: PolicyConfig::default(),
            critic: NetConfig::default(),
            inference: NetConfig::default(),
            action_scale: [2.0, 0.3],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.policy.trunk_hidden == 0 || self.policy.head_hidden == 0 || self.critic.hidden == 0 || self.inference.hidden == 0 {
            return Err(Error::invalid("hidden", "layer widths must be >= 1"));
        }
        if !self.policy.init_log_sigma.is_finite() {
            return Err(Error::invalid("init_log_sigma", "must be finite"));
        }
        if !self.action_scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("action_scale", "must be > 0"));
        }
        Ok(())
    }

    pub fn normalize(&self, a: Action) -> [f64; ACTION_DIM] {
        [a.accel / self.action_scale[0], a.turn_rate / self.action_scale[1]]
    }

    pub fn denormalize(&self, u: [f64; ACTION_DIM]) -> Action {
        Action::new(u[0] * self.action_scale[0], u[1] * self.action_scale[1])
    }

    /// Critic and inference input row for an observation and normalized action.
    pub fn pair_row(&self, sim: &SimConfig, obs: &Observation, action: [f64; ACTION_DIM]) -> Vec<f64> {
        let mut row = sim.features(obs);
        row.extend_from_slice(&action);
        row
    }
}

/// The three learned networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub policy: Policy,
    pub critic: Critic,
    pub inference: Inference,
}

impl Models {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            policy: Policy::init(&cfg.policy, rng)?,
            critic: Critic::init(&cfg.critic, rng)?,
            inference: Inference::init(&cfg.inference, rng)?,
        })
    }

    pub fn save_into(&self, ckpt: &mut Checkpoint) -> Result<()> {
        self.policy.save_into(ckpt, "policy")?;
        nets::save_net(ckpt, "critic", &self.critic.net)?;
        nets::save_net(ckpt, "inference", &self.inference.net)
    }

    pub fn load_from(cfg: &ModelConfig, ckpt: &Checkpoint) -> Result<Self> {
        let policy = Policy::load_from(&cfg.policy, ckpt, "policy")?;
        let mut critic = Critic::zeros(&cfg.critic)?;
        nets::load_net(ckpt, "critic", &mut critic.net)?;
        let mut inference = Inference::zeros(&cfg.inference)?;
        nets::load_net(ckpt, "inference", &mut inference.net)?;
        Ok(Self {
            policy,
            critic,
            inference,
        })
    }
}
