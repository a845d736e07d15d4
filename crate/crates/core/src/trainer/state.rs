use std::path::Path;

use serde_json::json;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, Models};
use crate::numerics::{Adam, Checkpoint, RmsProp};
use crate::rng::{stream, streams};

/// Everything a resumed run needs: networks, optimizer moments and the
/// number of completed iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub models: Models,
    pub critic_opt: RmsProp,
    pub inference_opt: Adam,
    pub iteration: usize,
    pub best_val_ami: Option<f64>,
}

impl TrainState {
    pub fn init(models: &ModelConfig, train: &TrainConfig, seed: u64) -> Result<Self> {
        let models = Models::init(models, &mut stream(seed, streams::INIT, &[]))?;
        Ok(Self {
            critic_opt: RmsProp::new(train.rmsprop, models.critic.net.n_params()),
            inference_opt: Adam::new(train.adam, models.inference.net.n_params()),
            models,
            iteration: 0,
            best_val_ami: None,
        })
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new(json!({
            "iteration": self.iteration,
            "adam_t": self.inference_opt.t,
            "best_val_ami": self.best_val_ami,
            "run": extra,
        }));
        self.models.save_into(&mut ckpt)?;
        ckpt.push("opt.critic.sq", &[self.critic_opt.sq.len()], &self.critic_opt.sq)?;
        ckpt.push("opt.inference.m", &[self.inference_opt.m.len()], &self.inference_opt.m)?;
        ckpt.push("opt.inference.v", &[self.inference_opt.v.len()], &self.inference_opt.v)?;
        Ok(ckpt)
    }

    pub fn from_checkpoint(models: &ModelConfig, train: &TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        let m = Models::load_from(models, ckpt)?;
        let nc = m.critic.net.n_params();
        let ni = m.inference.net.n_params();
        let mut critic_opt = RmsProp::new(train.rmsprop, nc);
        critic_opt.sq = ckpt.expect("opt.critic.sq", &[nc])?.to_vec();
        let mut inference_opt = Adam::new(train.adam, ni);
        inference_opt.m = ckpt.expect("opt.inference.m", &[ni])?.to_vec();
        inference_opt.v = ckpt.expect("opt.inference.v", &[ni])?.to_vec();
        let meta = &ckpt.meta;
        let field = |k: &str| meta.get(k).ok_or_else(|| Error::Schema(format!("checkpoint meta lacks `{k}`")));
        inference_opt.t = field("adam_t")?.as_u64().ok_or_else(|| Error::Schema("adam_t".into()))?;
        let iteration = field("iteration")?.as_u64().ok_or_else(|| Error::Schema("iteration".into()))? as usize;
        Ok(Self {
            models: m,
            critic_opt,
            inference_opt,
            iteration,
            best_val_ami: meta.get("best_val_ami").and_then(|v| v.as_f64()),
        })
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        self.to_checkpoint(extra)?.save(path)
    }

    pub fn load(models: &ModelConfig, train: &TrainConfig, path: &Path) -> Result<Self> {
        Self::from_checkpoint(models, train, &Checkpoint::load(path)?)
    }
}
