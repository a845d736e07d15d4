//! LIDAR scan, event indicators and the ego observation vector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::{ray_rect_distance, rects_overlap};
use super::scene::{SceneState, VehiclePose};
use super::track::TrackGeometry;

pub const N_BEAMS: usize = 20;
pub const N_ROAD_FEATURES: usize = 8;
pub const N_INDICATORS: usize = 3;
/// Observation layout: `[lidar_dist | lidar_rate | road_features | indicators]`.
pub const OBS_DIM: usize = 2 * N_BEAMS + N_ROAD_FEATURES + N_INDICATORS;

pub const LIDAR_DIST: std::ops::Range<usize> = 0..N_BEAMS;
pub const LIDAR_RATE: std::ops::Range<usize> = N_BEAMS..2 * N_BEAMS;
pub const ROAD: std::ops::Range<usize> = 2 * N_BEAMS..2 * N_BEAMS + N_ROAD_FEATURES;
pub const INDICATORS: std::ops::Range<usize> = 2 * N_BEAMS + N_ROAD_FEATURES..OBS_DIM;

/// Offsets of the road features inside the `ROAD` slice.
pub mod road {
    pub const SPEED: usize = 0;
    pub const LANE_OFFSET: usize = 1;
    pub const HEADING: usize = 2;
    pub const CURVATURE: usize = 3;
    pub const DIST_LEFT: usize = 4;
    pub const DIST_RIGHT: usize = 5;
    pub const PREV_ACCEL: usize = 6;
    pub const PREV_TURN_RATE: usize = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Events {
    pub collision: bool,
    pub offroad: bool,
    pub reversal: bool,
}

impl Events {
    pub fn any(&self) -> bool {
        self.collision || self.offroad || self.reversal
    }

    pub fn as_indicators(&self) -> [f64; 3] {
        [
            f64::from(u8::from(self.collision)),
            f64::from(u8::from(self.offroad)),
            f64::from(u8::from(self.reversal)),
        ]
    }
}

/// Raw (unstandardized) ego observation, 51 values in the fixed layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn lidar_dist(&self) -> &[f64] {
        &self.0[LIDAR_DIST]
    }
    pub fn lidar_rate(&self) -> &[f64] {
        &self.0[LIDAR_RATE]
    }
    pub fn road_features(&self) -> &[f64] {
        &self.0[ROAD]
    }
    pub fn indicators(&self) -> &[f64] {
        &self.0[INDICATORS]
    }
    pub fn speed(&self) -> f64 {
        self.0[ROAD.start + road::SPEED]
    }
}

pub struct LidarScan {
    pub dist: [f64; N_BEAMS],
    pub rate: [f64; N_BEAMS],
}

/// Casts `N_BEAMS` rays from the ego centre, uniformly over 360 degrees with
/// beam 0 along the ego heading and increasing counter-clockwise.
///
/// The range rate is the relative velocity of the hit vehicle projected on
/// the beam direction, and zero when nothing is hit.
pub fn lidar_scan(
    track: &TrackGeometry,
    scene: &SceneState,
    ego_index: usize,
    max_range: f64,
) -> LidarScan {
    let poses = scene.poses(track);
    lidar_scan_poses(&poses, ego_index, max_range)
}

pub(crate) fn lidar_scan_poses(poses: &[VehiclePose], ego_index: usize, max_range: f64) -> LidarScan {
    let ego = &poses[ego_index];
    let (evx, evy) = ego.velocity();
    let mut dist = [max_range; N_BEAMS];
    let mut rate = [0.0; N_BEAMS];
    for k in 0..N_BEAMS {
        let angle = ego.heading + 2.0 * PI * k as f64 / N_BEAMS as f64;
        let (ux, uy) = (angle.cos(), angle.sin());
        for (j, other) in poses.iter().enumerate() {
            if j == ego_index {
                continue;
            }
            if let Some(d) = ray_rect_distance(ego.x, ego.y, ux, uy, other) {
                if d < dist[k] {
                    dist[k] = d;
                    let (ovx, ovy) = other.velocity();
                    rate[k] = (ovx - evx) * ux + (ovy - evy) * uy;
                }
            }
        }
    }
    LidarScan { dist, rate }
}

/// Collision, offroad and reversal indicators of the ego vehicle.
pub fn detect_events(track: &TrackGeometry, scene: &SceneState, ego_index: usize) -> Events {
    let poses = scene.poses(track);
    detect_events_poses(track, scene, &poses, ego_index)
}

pub(crate) fn detect_events_poses(
    track: &TrackGeometry,
    scene: &SceneState,
    poses: &[VehiclePose],
    ego_index: usize,
) -> Events {
    let ego = &scene.vehicles[ego_index];
    let collision = poses
        .iter()
        .enumerate()
        .any(|(j, p)| j != ego_index && rects_overlap(&poses[ego_index], p));
    Events {
        collision,
        offroad: ego.t.abs() + ego.width / 2.0 > track.half_width(),
        reversal: ego.speed < 0.0,
    }
}

/// Assembles the raw 51-value observation of `ego_index`.
pub fn build_observation(
    track: &TrackGeometry,
    scene: &SceneState,
    ego_index: usize,
    max_range: f64,
) -> Observation {
    let poses = scene.poses(track);
    let scan = lidar_scan_poses(&poses, ego_index, max_range);
    let events = detect_events_poses(track, scene, &poses, ego_index);
    let ego = &scene.vehicles[ego_index];
    let lane_offset = ego.t - track.lane_center(track.lane_of(ego.t));
    let half_lane = track.lane_width / 2.0;
    let mut v = Vec::with_capacity(OBS_DIM);
    v.extend_from_slice(&scan.dist);
    v.extend_from_slice(&scan.rate);
    v.extend_from_slice(&[
        ego.speed,
        lane_offset,
        ego.heading_rel,
        track.curvature(ego.s),
        half_lane - lane_offset,
        half_lane + lane_offset,
        ego.last_action.accel,
        ego.last_action.turn_rate,
    ]);
    v.extend_from_slice(&events.as_indicators());
    Observation(v)
}

/// Fixed affine standardization `(x - center) / scale` applied per feature
/// group before observations enter a network. Indicators pass through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationScaling {
    pub lidar_dist_center: f64,
    pub lidar_dist_scale: f64,
    pub lidar_rate_scale: f64,
    pub speed_center: f64,
    pub speed_scale: f64,
    pub lane_offset_scale: f64,
    pub heading_scale: f64,
    pub curvature_scale: f64,
    pub marking_center: f64,
    pub marking_scale: f64,
    pub accel_scale: f64,
    pub turn_rate_scale: f64,
}

impl Default for ObservationScaling {
    fn default() -> Self {
        Self {
            lidar_dist_center: 50.0,
            lidar_dist_scale: 50.0,
            lidar_rate_scale: 10.0,
            speed_center: 14.0,
            speed_scale: 5.0,
            lane_offset_scale: 1.5,
            heading_scale: 0.1,
            curvature_scale: 0.03,
            marking_center: 1.5,
            marking_scale: 1.5,
            accel_scale: 2.0,
            turn_rate_scale: 0.3,
        }
    }
}

impl ObservationScaling {
    /// Per-feature `(center, scale)` pairs in observation order.
    pub fn affine(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(OBS_DIM);
        out.extend(std::iter::repeat_n((self.lidar_dist_center, self.lidar_dist_scale), N_BEAMS));
        out.extend(std::iter::repeat_n((0.0, self.lidar_rate_scale), N_BEAMS));
        out.extend_from_slice(&[
            (self.speed_center, self.speed_scale),
            (0.0, self.lane_offset_scale),
            (0.0, self.heading_scale),
            (0.0, self.curvature_scale),
            (self.marking_center, self.marking_scale),
            (self.marking_center, self.marking_scale),
            (0.0, self.accel_scale),
            (0.0, self.turn_rate_scale),
        ]);
        out.extend(std::iter::repeat_n((0.0, 1.0), N_INDICATORS));
        out
    }

    pub fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        debug_assert_eq!(raw.len(), OBS_DIM);
        raw.iter()
            .zip(self.affine())
            .map(|(x, (c, s))| (x - c) / s)
            .collect()
    }
}
