use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::track::TrackGeometry;
use crate::error::{Error, Result};

/// Fixed simulation timestep, seconds.
pub const DT: f64 = 0.1;

/// Longitudinal acceleration and yaw rate of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub accel: f64,
    pub turn_rate: f64,
}

impl Action {
    pub fn new(accel: f64, turn_rate: f64) -> Self {
        Self { accel, turn_rate }
    }

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.turn_rate.is_finite()
    }
}

/// Clamp bounds applied to every action before integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBounds {
    pub max_accel: f64,
    pub max_turn_rate: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            max_accel: 4.0,
            max_turn_rate: 1.0,
        }
    }
}

impl ActionBounds {
    pub fn clamp(&self, a: Action) -> Action {
        Action {
            accel: a.accel.clamp(-self.max_accel, self.max_accel),
            turn_rate: a.turn_rate.clamp(-self.max_turn_rate, self.max_turn_rate),
        }
    }
}

/// Kinematic state of one vehicle in track coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub s: f64,
    pub t: f64,
    pub heading_rel: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    /// Expert style class, `None` for a learned driver.
    pub style_class: Option<u8>,
    /// The clamped action applied on the most recent step.
    pub last_action: Action,
}

impl VehicleState {
    pub fn new(s: f64, t: f64, speed: f64) -> Self {
        Self {
            s,
            t,
            heading_rel: 0.0,
            speed,
            length: 4.5,
            width: 2.0,
            style_class: None,
            last_action: Action::default(),
        }
    }
}

/// Global pose of one vehicle, used by the geometric routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehiclePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

impl VehiclePose {
    pub fn velocity(&self) -> (f64, f64) {
        (self.speed * self.heading.cos(), self.speed * self.heading.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub time_index: u64,
    pub vehicles: Vec<VehicleState>,
    pub ego_index: usize,
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl SceneState {
    pub fn new(vehicles: Vec<VehicleState>, ego_index: usize) -> Result<Self> {
        if ego_index >= vehicles.len() {
            return Err(Error::invalid("ego_index", "must index a vehicle"));
        }
        Ok(Self {
            time_index: 0,
            vehicles,
            ego_index,
        })
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[self.ego_index]
    }

    pub fn pose(&self, track: &TrackGeometry, index: usize) -> VehiclePose {
        let v = &self.vehicles[index];
        let g = track.curvilinear_to_global(v.s, v.t);
        VehiclePose {
            x: g.x,
            y: g.y,
            heading: wrap_angle(g.heading + v.heading_rel),
            speed: v.speed,
            length: v.length,
            width: v.width,
        }
    }

    pub fn poses(&self, track: &TrackGeometry) -> Vec<VehiclePose> {
        (0..self.vehicles.len()).map(|i| self.pose(track, i)).collect()
    }
}

/// Advances every vehicle by one timestep with unicycle kinematics.
///
/// Actions are clamped, speed is integrated explicitly and the position is
/// advanced in the global frame at the step's mean speed along the
/// mid-step heading, then projected back onto the track.
pub fn step_scene(
    track: &TrackGeometry,
    bounds: &ActionBounds,
    scene: &SceneState,
    actions: &[Action],
) -> Result<SceneState> {
    if actions.len() != scene.vehicles.len() {
        return Err(Error::shape(
            "step_scene actions",
            scene.vehicles.len(),
            actions.len(),
        ));
    }
    let mut next = scene.clone();
    next.time_index += 1;
    for (i, (v, raw)) in next.vehicles.iter_mut().zip(actions).enumerate() {
        if !raw.is_finite() {
            return Err(Error::NonFiniteAction { vehicle: i });
        }
        let a = bounds.clamp(*raw);
        let g = track.curvilinear_to_global(v.s, v.t);
        let heading = g.heading + v.heading_rel;
        let mid_heading = heading + 0.5 * a.turn_rate * DT;
        let mean_speed = v.speed + 0.5 * a.accel * DT;
        let x = g.x + mean_speed * DT * mid_heading.cos();
        let y = g.y + mean_speed * DT * mid_heading.sin();
        let f = track.project(x, y);
        let new_heading = heading + a.turn_rate * DT;
        v.s = f.s;
        v.t = f.t;
        v.heading_rel = wrap_angle(new_heading - track.tangent_heading(f.s));
        v.speed += a.accel * DT;
        v.last_action = a;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(s: f64, t: f64, speed: f64) -> SceneState {
        SceneState::new(vec![VehicleState::new(s, t, speed)], 0).unwrap()
    }

    #[test]
    fn uniform_motion_on_straight() {
        let track = TrackGeometry::default();
        let scene = single(10.0, -1.5, 10.0);
        let next = step_scene(&track, &ActionBounds::default(), &scene, &[Action::default()]).unwrap();
        let v = next.ego();
        assert!((v.s - 11.0).abs() < 1e-12);
        assert!((v.t + 1.5).abs() < 1e-12);
        assert_eq!(next.time_index, 1);
    }

    #[test]
    fn constant_acceleration() {
        let track = TrackGeometry::default();
        let mut scene = single(0.0, 0.0, 10.0);
        for _ in 0..10 {
            scene = step_scene(&track, &ActionBounds::default(), &scene, &[Action::new(1.0, 0.0)]).unwrap();
        }
        assert!((scene.ego().speed - 11.0).abs() < 1e-12);
    }

    #[test]
    fn constant_turn_rate_on_straight() {
        let track = TrackGeometry::default();
        let mut scene = single(0.0, 0.0, 0.0);
        for _ in 0..10 {
            scene = step_scene(
                &track,
                &ActionBounds { max_accel: 4.0, max_turn_rate: 2.0 },
                &scene,
                &[Action::new(0.0, PI / 2.0)],
            )
            .unwrap();
        }
        assert!((scene.ego().heading_rel - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn actions_are_clamped() {
        let track = TrackGeometry::default();
        let scene = single(0.0, 0.0, 10.0);
        let next = step_scene(&track, &ActionBounds::default(), &scene, &[Action::new(100.0, -9.0)]).unwrap();
        assert_eq!(next.ego().last_action, Action::new(4.0, -1.0));
        assert!((next.ego().speed - 10.4).abs() < 1e-12);
    }

    #[test]
    fn non_finite_action_reports_vehicle() {
        let track = TrackGeometry::default();
        let scene = SceneState::new(
            vec![VehicleState::new(0.0, 0.0, 1.0), VehicleState::new(50.0, 0.0, 1.0)],
            0,
        )
        .unwrap();
        let err = step_scene(
            &track,
            &ActionBounds::default(),
            &scene,
            &[Action::default(), Action::new(f64::NAN, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteAction { vehicle: 1 }));
    }

    #[test]
    fn arc_following_with_curvature_feedforward() {
        let track = TrackGeometry::default();
        let s0 = track.straight_length + 1.0;
        let mut scene = single(s0, 0.0, 10.0);
        let omega = 10.0 / track.curve_radius;
        for _ in 0..20 {
            scene = step_scene(&track, &ActionBounds::default(), &scene, &[Action::new(0.0, omega)]).unwrap();
        }
        let e = scene.ego();
        assert!(e.t.abs() < 1e-3, "t {}", e.t);
        assert!(e.heading_rel.abs() < 1e-4, "heading {}", e.heading_rel);
        assert!((scene.ego().s - (s0 + 20.0)).abs() < 1e-2);
    }

    #[test]
    fn stepping_is_bitwise_deterministic() {
        let track = TrackGeometry::default();
        let scene = SceneState::new(
            vec![VehicleState::new(3.0, 1.0, 7.0), VehicleState::new(120.0, -1.0, 12.0)],
            1,
        )
        .unwrap();
        let acts = [Action::new(0.3, 0.1), Action::new(-1.0, 0.2)];
        let a = step_scene(&track, &ActionBounds::default(), &scene, &acts).unwrap();
        let b = step_scene(&track, &ActionBounds::default(), &scene, &acts).unwrap();
        assert_eq!(a, b);
    }
}
