//! Deterministic oval-track traffic world sampled at 10 Hz.

mod geometry;
mod scene;
mod sensors;
mod trace;
mod track;

use serde::{Deserialize, Serialize};

pub use geometry::{ray_rect_distance, rects_overlap};
pub use scene::{step_scene, Action, ActionBounds, SceneState, VehiclePose, VehicleState, DT};
pub use sensors::{
    build_observation, detect_events, lidar_scan, road, Events, LidarScan, Observation,
    ObservationScaling, INDICATORS, LIDAR_DIST, LIDAR_RATE, N_BEAMS, OBS_DIM, ROAD,
};
pub use trace::{write_trace, TraceRecord};
pub use track::{build_oval_track, Frenet, GlobalPose, TrackGeometry};


use crate::error::{Error, Result};

/// Simulator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub track: TrackGeometry,
    pub bounds: ActionBounds,
    pub lidar_max_range: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub scaling: ObservationScaling,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            track: TrackGeometry::default(),
            bounds: ActionBounds::default(),
            lidar_max_range: 100.0,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
            scaling: ObservationScaling::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.track.validate()?;
        if !(self.lidar_max_range > 0.0) {
            return Err(Error::invalid("lidar_max_range", "must be > 0"));
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return Err(Error::invalid("vehicle_length", "vehicle dimensions must be > 0"));
        }
        if !(self.bounds.max_accel > 0.0 && self.bounds.max_turn_rate > 0.0) {
            return Err(Error::invalid("bounds", "action bounds must be > 0"));
        }
        Ok(())
    }

    pub fn step(&self, scene: &SceneState, actions: &[Action]) -> Result<SceneState> {
        step_scene(&self.track, &self.bounds, scene, actions)
    }

    pub fn observe(&self, scene: &SceneState) -> Observation {
        build_observation(&self.track, scene, scene.ego_index, self.lidar_max_range)
    }

    pub fn events(&self, scene: &SceneState) -> Events {
        detect_events(&self.track, scene, scene.ego_index)
    }

    /// Standardized network input for an observation.
    pub fn features(&self, obs: &Observation) -> Vec<f64> {
        self.scaling.standardize(&obs.0)
    }
}
