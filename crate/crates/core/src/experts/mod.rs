//! Rule-based expert drivers and demonstration datasets.

mod control;
mod dataset;
mod idm;
mod neighbors;
mod style;

use serde::{Deserialize, Serialize};

pub use control::{mobil_decide, steer_to_lane, ControllerConfig, DriverState, LaneDecision, SteeringGains};
pub use dataset::{
    balanced_classes, class_histogram, expert_step, generate_demonstration, generate_split, read_jsonl, spawn_scene,
    write_jsonl, BurnInStep, Demonstration, Horizon, Split, TrackPoint, DATASET_SCHEMA_VERSION,
};
pub use idm::{idm_accel, IdmAccel};
pub use neighbors::{follower, gap_between, leader, occupied_lanes, Neighbor};
pub use style::{sample_style, StyleClass, StyleParams, StyleTemplate, StyleTemplates, N_STYLES};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    pub templates: StyleTemplates,
    pub controller: ControllerConfig,
    pub vehicles_per_scene: usize,
    /// Minimum bumper gap between vehicles spawned in the same lane, m.
    pub spawn_min_gap: f64,
    /// Initial speed as a fraction of desired speed, drawn uniformly.
    pub spawn_speed_fraction: (f64, f64),
    pub max_spawn_attempts: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            templates: StyleTemplates::default(),
            controller: ControllerConfig::default(),
            vehicles_per_scene: 12,
            spawn_min_gap: 20.0,
            spawn_speed_fraction: (0.7, 1.0),
            max_spawn_attempts: 1000,
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<()> {
        self.templates.validate()?;
        if self.vehicles_per_scene == 0 {
            return Err(Error::invalid("vehicles_per_scene", "must be >= 1"));
        }
        let (lo, hi) = self.spawn_speed_fraction;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::invalid("spawn_speed_fraction", "need 0 < lo <= hi"));
        }
        if !(self.spawn_min_gap >= 0.0) {
            return Err(Error::invalid("spawn_min_gap", "must be >= 0"));
        }
        Ok(())
    }
}
