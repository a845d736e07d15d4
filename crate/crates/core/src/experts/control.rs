//! Closed-loop expert driver: IDM longitudinal control, MOBIL lane
//! selection and a PD lateral controller in the turn-rate action space.

use serde::{Deserialize, Serialize};

use super::idm::idm_accel;
use super::neighbors::{follower, gap_between, leader, occupied_lanes, Neighbor};
use super::style::{StyleClass, StyleParams};
use crate::simulator::{Action, ActionBounds, SceneState, SimConfig, TrackGeometry, VehicleState, DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneDecision {
    Left,
    Stay,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringGains {
    /// Lateral-error gain, divided by speed so the closed loop is speed independent.
    pub kp: f64,
    /// Relative-heading gain.
    pub kd: f64,
    /// Speed floor used in the lateral-error term.
    pub min_speed: f64,
}

impl Default for SteeringGains {
    fn default() -> Self {
        // critically damped lateral error, natural frequency 2 rad/s
        Self {
            kp: 4.0,
            kd: 4.0,
            min_speed: 5.0,
        }
    }
}

/// Mutable per-vehicle expert state carried across steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverState {
    pub class: StyleClass,
    pub params: StyleParams,
    pub target_lane: usize,
    /// Steps left before the next lane-change decision is allowed.
    pub cooldown: u32,
}

/// Turn rate steering `vehicle` towards the lateral offset `target_t`.
///
/// Curvature feed-forward keeps the heading aligned with the lane on arcs;
/// the PD part acts on lateral error and relative heading.
pub fn steer_to_lane(
    track: &TrackGeometry,
    bounds: &ActionBounds,
    gains: &SteeringGains,
    vehicle: &VehicleState,
    target_t: f64,
) -> f64 {
    let kappa = track.curvature(vehicle.s);
    let denom = (1.0 - kappa * vehicle.t).max(0.1);
    let feedforward = kappa * vehicle.speed * vehicle.heading_rel.cos() / denom;
    let error = vehicle.t - target_t;
    let feedback = -gains.kp * error / vehicle.speed.abs().max(gains.min_speed) - gains.kd * vehicle.heading_rel;
    (feedforward + feedback).clamp(-bounds.max_turn_rate, bounds.max_turn_rate)
}

fn idm_vs(
    bounds: &ActionBounds,
    scene: &SceneState,
    p: &StyleParams,
    me: usize,
    lead: Option<Neighbor>,
) -> (f64, bool) {
    let v = scene.vehicles[me].speed;
    match lead {
        Some(n) => {
            let dv = v - scene.vehicles[n.index].speed;
            let a = idm_accel(p, v, dv, n.gap, bounds);
            (a.accel, a.emergency)
        }
        None => (idm_accel(p, v, 0.0, f64::INFINITY, bounds).accel, false),
    }
}

/// MOBIL lane-change decision for vehicle `i`.
///
/// `params[j]` holds the driver parameters of vehicle `j`; vehicles without
/// expert parameters (the learned ego) are modelled with `i`'s parameters.
/// A change is taken when
/// `ã_c − a_c + p[(ã_n − a_n) + (ã_o − a_o)] > Δa_th`, the new follower
/// keeps `ã_n > −b_safe` without an emergency brake, and the changer itself
/// does not need to brake harder than `b_safe`. Equal incentives keep the
/// lane, then prefer the left.
pub fn mobil_decide(
    track: &TrackGeometry,
    bounds: &ActionBounds,
    scene: &SceneState,
    i: usize,
    params: &[Option<StyleParams>],
) -> LaneDecision {
    // Safety criteria compare raw IDM demands, which the actuator clamp hides.
    let bounds = &ActionBounds {
        max_accel: f64::INFINITY,
        ..*bounds
    };
    let me = params[i].expect("deciding vehicle must be an expert");
    let param_of = |j: usize| params[j].unwrap_or(me);
    let lane = track.lane_of(scene.vehicles[i].t);

    let cur_leader = leader(track, scene, i, lane, lane, None);
    let (a_c, _) = idm_vs(bounds, scene, &me, i, cur_leader);
    let old_follower = follower(track, scene, i, lane, lane, None);
    let (old_term_before, old_term_after) = match old_follower {
        Some(o) => {
            let po = param_of(o.index);
            let before = idm_vs(bounds, scene, &po, o.index, Some(Neighbor { index: i, gap: o.gap })).0;
            let after_leader = leader(track, scene, o.index, lane, lane, Some(i));
            let after = idm_vs(bounds, scene, &po, o.index, after_leader).0;
            (before, after)
        }
        None => (0.0, 0.0),
    };

    let mut best: Option<(f64, LaneDecision)> = None;
    let candidates = [
        (lane + 1 < track.n_lanes, lane + 1, LaneDecision::Left),
        (lane > 0, lane.wrapping_sub(1), LaneDecision::Right),
    ];
    for (exists, target, decision) in candidates {
        if !exists {
            continue;
        }
        let new_leader = leader(track, scene, i, target, target, None);
        let (a_c_new, c_emergency) = idm_vs(bounds, scene, &me, i, new_leader);
        if c_emergency || a_c_new < -me.safe_decel {
            continue;
        }
        let new_follower = follower(track, scene, i, target, target, None);
        let (n_before, n_after) = match new_follower {
            Some(n) => {
                let pn = param_of(n.index);
                let lead_now = leader(track, scene, n.index, target, target, Some(i));
                let before = idm_vs(bounds, scene, &pn, n.index, lead_now).0;
                let gap = gap_between(track, scene, n.index, i);
                let (after, emergency) =
                    idm_vs(bounds, scene, &pn, n.index, Some(Neighbor { index: i, gap }));
                if emergency || after <= -me.safe_decel {
                    continue;
                }
                (before, after)
            }
            None => (0.0, 0.0),
        };
        let incentive = a_c_new - a_c
            + me.politeness * ((n_after - n_before) + (old_term_after - old_term_before));
        if incentive > me.change_threshold && best.map_or(true, |(b, _)| incentive > b) {
            best = Some((incentive, decision));
        }
    }
    best.map_or(LaneDecision::Stay, |(_, d)| d)
}

/// Expert controller shared by dataset generation and rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub steering: SteeringGains,
    /// Steps between lane-change decisions.
    pub lane_change_cooldown: u32,
    /// A lane change counts as finished within this lateral distance, m.
    pub settle_tolerance: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            steering: SteeringGains::default(),
            lane_change_cooldown: 50,
            settle_tolerance: 0.3,
        }
    }
}

impl ControllerConfig {
    /// Computes expert actions for every vehicle with a driver, updating lane
    /// targets. Entries for vehicles without a driver are `None`.
    pub fn act(
        &self,
        sim: &SimConfig,
        scene: &SceneState,
        drivers: &mut [Option<DriverState>],
    ) -> Vec<Option<Action>> {
        let track = &sim.track;
        let params: Vec<Option<StyleParams>> = drivers.iter().map(|d| d.map(|d| d.params)).collect();
        let mut out = Vec::with_capacity(drivers.len());
        for (i, slot) in drivers.iter_mut().enumerate() {
            let Some(state) = slot.as_mut() else {
                out.push(None);
                continue;
            };
            let v = &scene.vehicles[i];
            if state.cooldown > 0 {
                state.cooldown -= 1;
            }
            let settled = track.lane_of(v.t) == state.target_lane
                && (v.t - track.lane_center(state.target_lane)).abs() < self.settle_tolerance;
            if state.cooldown == 0 && settled {
                match mobil_decide(track, &sim.bounds, scene, i, &params) {
                    LaneDecision::Left => {
                        state.target_lane += 1;
                        state.cooldown = self.lane_change_cooldown;
                    }
                    LaneDecision::Right => {
                        state.target_lane -= 1;
                        state.cooldown = self.lane_change_cooldown;
                    }
                    LaneDecision::Stay => {}
                }
            }
            let (lo, hi) = occupied_lanes(track, scene, i);
            let lo = lo.min(state.target_lane);
            let hi = hi.max(state.target_lane);
            let lead = leader(track, scene, i, lo, hi, None);
            let (accel, _) = idm_vs(&sim.bounds, scene, &state.params, i, lead);
            // never brake through zero speed
            let accel = accel.max(-v.speed.max(0.0) / DT);
            let turn = steer_to_lane(
                track,
                &sim.bounds,
                &self.steering,
                v,
                track.lane_center(state.target_lane),
            );
            out.push(Some(Action::new(accel, turn)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::style::StyleTemplates;
    use crate::simulator::step_scene;

    fn expert(class: StyleClass, lane: usize) -> DriverState {
        DriverState {
            class,
            params: StyleTemplates::default().get(class).mean_params(),
            target_lane: lane,
            cooldown: 0,
        }
    }

    #[test]
    fn centred_aligned_vehicle_does_not_steer() {
        let track = TrackGeometry::default();
        let v = VehicleState::new(20.0, -1.5, 10.0);
        let u = steer_to_lane(&track, &ActionBounds::default(), &SteeringGains::default(), &v, -1.5);
        assert_eq!(u, 0.0);
    }

    #[test]
    fn offset_left_steers_right() {
        let track = TrackGeometry::default();
        let v = VehicleState::new(20.0, -1.0, 10.0);
        let u = steer_to_lane(&track, &ActionBounds::default(), &SteeringGains::default(), &v, -1.5);
        assert!(u < 0.0);
    }

    #[test]
    fn lateral_step_response_settles_without_overshoot() {
        let track = TrackGeometry::default();
        let bounds = ActionBounds::default();
        let gains = SteeringGains::default();
        for &speed in &[6.0, 10.0, 18.0] {
            let mut scene = SceneState::new(vec![VehicleState::new(0.0, -0.5, speed)], 0).unwrap();
            let target = -1.5;
            let mut overshoot: f64 = 0.0;
            for _ in 0..30 {
                let u = steer_to_lane(&track, &bounds, &gains, scene.ego(), target);
                scene = step_scene(&track, &bounds, &scene, &[Action::new(0.0, u)]).unwrap();
                overshoot = overshoot.max(target - scene.ego().t);
            }
            let err = (scene.ego().t - target).abs();
            assert!(err < 0.05, "speed {speed}: residual {err}");
            assert!(overshoot < 0.2, "speed {speed}: overshoot {overshoot}");
        }
    }

    fn params_of(drivers: &[DriverState]) -> Vec<Option<StyleParams>> {
        drivers.iter().map(|d| Some(d.params)).collect()
    }

    #[test]
    fn lone_vehicle_stays() {
        let track = TrackGeometry::default();
        let scene = SceneState::new(vec![VehicleState::new(10.0, -1.5, 15.0)], 0).unwrap();
        let d = [expert(StyleClass::Aggressive, 0)];
        let decision = mobil_decide(&track, &ActionBounds::default(), &scene, 0, &params_of(&d));
        assert_eq!(decision, LaneDecision::Stay);
    }

    #[test]
    fn slow_leader_with_empty_adjacent_lane_triggers_change() {
        let track = TrackGeometry::default();
        let bounds = ActionBounds::default();
        let scene = SceneState::new(
            vec![VehicleState::new(10.0, -1.5, 15.0), VehicleState::new(35.0, -1.5, 8.0)],
            0,
        )
        .unwrap();
        let mut d = [expert(StyleClass::Aggressive, 0), expert(StyleClass::Passive, 0)];
        d[0].params.politeness = 0.0;

        // oracle: own IDM gain from losing the leader must clear the threshold
        let p = d[0].params;
        let gap = 25.0 - 4.5;
        let stay = idm_accel(&p, 15.0, 7.0, gap, &bounds).accel;
        let free = idm_accel(&p, 15.0, 0.0, f64::INFINITY, &bounds).accel;
        assert!(free - stay > p.change_threshold);

        let decision = mobil_decide(&track, &bounds, &scene, 0, &params_of(&d));
        assert_eq!(decision, LaneDecision::Left);
    }

    #[test]
    fn unsafe_gap_vetoes_change() {
        let track = TrackGeometry::default();
        let bounds = ActionBounds::default();
        // fast follower right behind in the target lane
        let scene = SceneState::new(
            vec![
                VehicleState::new(20.0, -1.5, 15.0),
                VehicleState::new(40.0, -1.5, 8.0),
                VehicleState::new(12.0, 1.5, 20.0),
            ],
            0,
        )
        .unwrap();
        let mut d = [
            expert(StyleClass::Aggressive, 0),
            expert(StyleClass::Passive, 0),
            expert(StyleClass::Speeder, 1),
        ];
        d[0].params.politeness = 0.0;
        let params = params_of(&d);
        let gap = gap_between(&track, &scene, 2, 0);
        let imposed = idm_accel(&d[2].params, 20.0, 5.0, gap, &bounds);
        assert!(imposed.accel <= -d[0].params.safe_decel || imposed.emergency);
        assert_eq!(mobil_decide(&track, &bounds, &scene, 0, &params), LaneDecision::Stay);
    }

    proptest::proptest! {
        #[test]
        fn accepted_changes_respect_follower_safety(
            cars in proptest::collection::vec((0.0f64..120.0, 0usize..2, 2.0f64..20.0, 0usize..4), 2..7),
        ) {
            let track = TrackGeometry::default();
            let bounds = ActionBounds::default();
            let vehicles: Vec<VehicleState> = cars
                .iter()
                .map(|&(s, lane, v, _)| VehicleState::new(s, track.lane_center(lane), v))
                .collect();
            let scene = SceneState::new(vehicles, 0).unwrap();
            let drivers: Vec<DriverState> =
                cars.iter().map(|&(_, lane, _, c)| expert(StyleClass::ALL[c], lane)).collect();
            let params = params_of(&drivers);
            let raw = ActionBounds { max_accel: f64::INFINITY, ..bounds };
            for i in 0..scene.vehicles.len() {
                let lane = track.lane_of(scene.vehicles[i].t);
                let target = match mobil_decide(&track, &bounds, &scene, i, &params) {
                    LaneDecision::Stay => continue,
                    LaneDecision::Left => lane + 1,
                    LaneDecision::Right => lane - 1,
                };
                if let Some(n) = follower(&track, &scene, i, target, target, None) {
                    let gap = gap_between(&track, &scene, n.index, i);
                    let dv = scene.vehicles[n.index].speed - scene.vehicles[i].speed;
                    let a = idm_accel(&drivers[n.index].params, scene.vehicles[n.index].speed, dv, gap, &raw);
                    proptest::prop_assert!(!a.emergency && a.accel > -drivers[i].params.safe_decel);
                }
            }
        }
    }
}
