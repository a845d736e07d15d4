//! Demonstration generation and the JSON-lines dataset format.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::control::DriverState;
use super::style::{sample_style, StyleClass, N_STYLES};
use super::ExpertConfig;
use crate::error::{Error, Result};
use crate::rng::{stream, stream_key, streams, StreamRng};
use crate::simulator::{rects_overlap, Action, Observation, SceneState, SimConfig, VehicleState};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    fn stream_id(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurnInStep {
    pub obs: Observation,
    pub action: Action,
}

/// Ego global position and speed at one continuation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
}

/// One expert demonstration. The style label is only for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demonstration {
    pub schema_version: u32,
    pub id: u64,
    pub style_class: StyleClass,
    pub v0: f64,
    pub burn_in: Vec<BurnInStep>,
    pub handoff_scene: SceneState,
    /// Expert state of every vehicle at handoff, ego included.
    pub drivers: Vec<DriverState>,
    pub expert_continuation: Vec<TrackPoint>,
    pub rng_seed: u64,
}

impl Demonstration {
    /// Ego position and speed at the handoff (continuation step 0).
    pub fn handoff_point(&self, sim: &SimConfig) -> TrackPoint {
        let p = self.handoff_scene.pose(&sim.track, self.handoff_scene.ego_index);
        TrackPoint {
            x: p.x,
            y: p.y,
            speed: p.speed,
        }
    }
}

/// Lengths of a demonstration's recorded segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub burn_in: usize,
    pub continuation: usize,
}

impl Default for Horizon {
    fn default() -> Self {
        Self {
            burn_in: 50,
            continuation: 300,
        }
    }
}

/// Balanced class assignment: `n / 4` of each class, remainder taken in
/// class order, then shuffled.
pub fn balanced_classes(n: usize, rng: &mut StreamRng) -> Vec<StyleClass> {
    let mut classes: Vec<StyleClass> = (0..n).map(|i| StyleClass::ALL[i % N_STYLES]).collect();
    classes.shuffle(rng);
    classes
}

/// Places `vehicles_per_scene` non-overlapping vehicles with sampled
/// drivers; the ego (index 0) gets `ego_class`. Returns the ego's v0.
pub fn spawn_scene(
    sim: &SimConfig,
    cfg: &ExpertConfig,
    ego_class: StyleClass,
    rng: &mut StreamRng,
) -> Result<(SceneState, Vec<DriverState>, f64)> {
    let track = &sim.track;
    let n = cfg.vehicles_per_scene;
    for _ in 0..cfg.max_spawn_attempts {
        let mut vehicles: Vec<VehicleState> = Vec::with_capacity(n);
        let mut drivers = Vec::with_capacity(n);
        for i in 0..n {
            let class = if i == 0 {
                ego_class
            } else {
                StyleClass::ALL[rng.random_range(0..N_STYLES)]
            };
            let params = sample_style(&cfg.templates, class, rng);
            // only the crowded vehicle is redrawn, not the whole scene
            let placed = (0..cfg.max_spawn_attempts).find_map(|_| {
                let lane = rng.random_range(0..track.n_lanes);
                let s = rng.random_range(0.0..track.centerline_length());
                let frac = rng.random_range(cfg.spawn_speed_fraction.0..=cfg.spawn_speed_fraction.1);
                let mut v = VehicleState::new(s, track.lane_center(lane), params.desired_speed * frac);
                v.length = sim.vehicle_length;
                v.width = sim.vehicle_width;
                v.style_class = Some(class as u8);
                let crowded = vehicles.iter().any(|o| {
                    track.lane_of(o.t) == lane && {
                        let d = track.forward_distance(o.s, s).min(track.forward_distance(s, o.s));
                        d - v.length < cfg.spawn_min_gap
                    }
                });
                (!crowded).then_some((v, lane))
            });
            let Some((v, lane)) = placed else {
                return Err(Error::SpawnFailed {
                    attempts: cfg.max_spawn_attempts,
                });
            };
            vehicles.push(v);
            drivers.push(DriverState {
                class,
                params,
                target_lane: lane,
                cooldown: 0,
            });
        }
        let scene = SceneState::new(vehicles, 0)?;
        let poses = scene.poses(track);
        let overlapping = (0..n).any(|i| (i + 1..n).any(|j| rects_overlap(&poses[i], &poses[j])));
        if overlapping {
            continue;
        }
        let v0 = drivers[0].params.desired_speed;
        return Ok((scene, drivers, v0));
    }
    Err(Error::SpawnFailed {
        attempts: cfg.max_spawn_attempts,
    })
}

/// Advances a fully expert-driven scene by one step.
pub fn expert_step(
    sim: &SimConfig,
    cfg: &ExpertConfig,
    scene: &SceneState,
    drivers: &mut [DriverState],
) -> Result<(SceneState, Action)> {
    let mut slots: Vec<Option<DriverState>> = drivers.iter().copied().map(Some).collect();
    let actions: Vec<Action> = cfg
        .controller
        .act(sim, scene, &mut slots)
        .into_iter()
        .map(|a| a.expect("every vehicle has a driver"))
        .collect();
    for (d, s) in drivers.iter_mut().zip(slots) {
        *d = s.expect("driver kept");
    }
    let ego_action = sim.bounds.clamp(actions[scene.ego_index]);
    Ok((sim.step(scene, &actions)?, ego_action))
}

/// Simulates one demonstration: burn-in under expert control, then the
/// expert continuation used as the playback reference.
pub fn generate_demonstration(
    sim: &SimConfig,
    cfg: &ExpertConfig,
    horizon: Horizon,
    seed: u64,
    split: Split,
    id: u64,
    class: StyleClass,
) -> Result<Demonstration> {
    let path = [split.stream_id(), id];
    let rng_seed = stream_key(seed, streams::DATASET, &path);
    let mut rng = stream(seed, streams::DATASET, &path);
    let (mut scene, mut drivers, v0) = spawn_scene(sim, cfg, class, &mut rng)?;

    let mut burn_in = Vec::with_capacity(horizon.burn_in);
    for _ in 0..horizon.burn_in {
        let obs = sim.observe(&scene);
        let (next, action) = expert_step(sim, cfg, &scene, &mut drivers)?;
        burn_in.push(BurnInStep { obs, action });
        scene = next;
    }
    let handoff_scene = scene.clone();
    let handoff_drivers = drivers.clone();

    let mut expert_continuation = Vec::with_capacity(horizon.continuation);
    for _ in 0..horizon.continuation {
        let (next, _) = expert_step(sim, cfg, &scene, &mut drivers)?;
        scene = next;
        let p = scene.pose(&sim.track, scene.ego_index);
        expert_continuation.push(TrackPoint {
            x: p.x,
            y: p.y,
            speed: p.speed,
        });
    }

    Ok(Demonstration {
        schema_version: DATASET_SCHEMA_VERSION,
        id,
        style_class: class,
        v0,
        burn_in,
        handoff_scene,
        drivers: handoff_drivers,
        expert_continuation,
        rng_seed,
    })
}

/// Generates `n` demonstrations of one split. Work is spread over the
/// current rayon pool; every demonstration owns its random stream so the
/// output does not depend on the number of workers.
pub fn generate_split(
    sim: &SimConfig,
    cfg: &ExpertConfig,
    horizon: Horizon,
    seed: u64,
    split: Split,
    n: usize,
) -> Result<Vec<Demonstration>> {
    let mut rng = stream(seed, streams::DATASET, &[split.stream_id(), u64::MAX]);
    let classes = balanced_classes(n, &mut rng);
    classes
        .into_par_iter()
        .enumerate()
        .map(|(id, class)| generate_demonstration(sim, cfg, horizon, seed, split, id as u64, class))
        .collect()
}

pub fn class_histogram(demos: &[Demonstration]) -> [usize; N_STYLES] {
    let mut h = [0; N_STYLES];
    for d in demos {
        h[d.style_class.index()] += 1;
    }
    h
}

pub fn write_jsonl<W: Write>(demos: &[Demonstration], mut out: W) -> Result<()> {
    for d in demos {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Demonstration>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Demonstration = serde_json::from_str(&line)?;
        if d.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "dataset schema version {} (expected {DATASET_SCHEMA_VERSION})",
                d.schema_version
            )));
        }
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (SimConfig, ExpertConfig) {
        (SimConfig::default(), ExpertConfig::default())
    }

    #[test]
    fn histogram_is_balanced() {
        let mut rng = stream(1, "t", &[]);
        let classes = balanced_classes(960, &mut rng);
        let mut h = [0; 4];
        for c in classes {
            h[c.index()] += 1;
        }
        assert_eq!(h, [240; 4]);
    }

    #[test]
    fn demonstration_shapes() {
        let (sim, cfg) = small();
        let d = generate_demonstration(&sim, &cfg, Horizon::default(), 42, Split::Train, 3, StyleClass::Passive).unwrap();
        assert_eq!(d.burn_in.len(), 50);
        assert_eq!(d.expert_continuation.len(), 300);
        assert_eq!(d.drivers.len(), cfg.vehicles_per_scene);
        assert!(d.burn_in.iter().all(|s| s.obs.0.len() == 51));
        assert_eq!(d.handoff_scene.time_index, 50);
        assert_eq!(d.drivers[0].class, StyleClass::Passive);
    }

    #[test]
    fn dense_scenes_always_spawn() {
        let (sim, cfg) = small();
        for seed in 0..2000 {
            let mut rng = stream(seed, "spawn", &[]);
            let (scene, drivers, _) = spawn_scene(&sim, &cfg, StyleClass::Aggressive, &mut rng).unwrap();
            assert_eq!(scene.vehicles.len(), drivers.len());
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_bits() {
        let (sim, cfg) = small();
        let demos = generate_split(&sim, &cfg, Horizon { burn_in: 5, continuation: 7 }, 1, Split::Val, 3).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&demos, &mut buf).unwrap();
        let back = read_jsonl(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, demos);
        let mut again = Vec::new();
        write_jsonl(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }
}
