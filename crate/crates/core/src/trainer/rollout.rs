use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::Algorithm;
use crate::error::Result;
use crate::experts::{Demonstration, ExpertConfig, TrackPoint};
use crate::models::{ModelConfig, Policy, ACTION_DIM, CODE_DIM};
use crate::simulator::{Action, Events, SimConfig};

/// Shared read-only configuration for simulating learned drivers.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub sim: &'a SimConfig,
    pub experts: &'a ExpertConfig,
    pub models: &'a ModelConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Collision,
    Offroad,
    Reversal,
}

impl Termination {
    pub fn from_events(e: &Events) -> Option<Self> {
        if e.collision {
            Some(Termination::Collision)
        } else if e.offroad {
            Some(Termination::Offroad)
        } else if e.reversal {
            Some(Termination::Reversal)
        } else {
            None
        }
    }
}

/// One policy-driven trajectory from a handoff scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub demo_index: usize,
    pub code: Option<usize>,
    /// Standardized observation per step, row-major `len x OBS_DIM`.
    pub features: Vec<f64>,
    /// Normalized actions.
    pub actions: Vec<[f64; ACTION_DIM]>,
    /// Events after each step.
    pub events: Vec<Events>,
    /// Ego position and speed after each step.
    pub points: Vec<TrackPoint>,
    pub termination: Option<Termination>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Controller of the ego vehicle during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum EgoDriver<'a> {
    Policy(&'a Policy),
    /// The ego's own recorded expert driver, which replays the continuation.
    Expert,
    /// A fixed physical action every step.
    Constant(Action),
}

/// Rollout options: `train_mode` ends the trajectory at the first event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutMode {
    pub horizon: usize,
    pub train_mode: bool,
    pub deterministic: bool,
}

/// Drives the ego from the demonstration's handoff scene while the other
/// vehicles keep their recorded expert drivers.
pub fn rollout<R: Rng + ?Sized>(
    env: Env<'_>,
    driver: EgoDriver<'_>,
    code: Option<usize>,
    demo: &Demonstration,
    demo_index: usize,
    mode: RolloutMode,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut scene = demo.handoff_scene.clone();
    let ego = scene.ego_index;
    let mut drivers: Vec<_> = demo.drivers.iter().copied().map(Some).collect();
    if !matches!(driver, EgoDriver::Expert) {
        drivers[ego] = None;
    }
    let mut traj = Trajectory {
        demo_index,
        code,
        features: Vec::with_capacity(mode.horizon * crate::simulator::OBS_DIM),
        actions: Vec::with_capacity(mode.horizon),
        events: Vec::with_capacity(mode.horizon),
        points: Vec::with_capacity(mode.horizon),
        termination: None,
    };
    for _ in 0..mode.horizon {
        let f = env.sim.features(&env.sim.observe(&scene));
        let mut actions: Vec<_> = env
            .experts
            .controller
            .act(env.sim, &scene, &mut drivers)
            .into_iter()
            .map(Option::unwrap_or_default)
            .collect();
        let u = match driver {
            EgoDriver::Policy(policy) => {
                let u = policy.act(&f, code, rng, mode.deterministic)?;
                actions[ego] = env.models.denormalize(u);
                u
            }
            EgoDriver::Expert => env.models.normalize(env.sim.bounds.clamp(actions[ego])),
            EgoDriver::Constant(a) => {
                actions[ego] = a;
                env.models.normalize(env.sim.bounds.clamp(a))
            }
        };
        scene = env.sim.step(&scene, &actions)?;
        let ev = env.sim.events(&scene);
        let p = scene.pose(&env.sim.track, ego);
        traj.features.extend_from_slice(&f);
        traj.actions.push(u);
        traj.events.push(ev);
        traj.points.push(TrackPoint {
            x: p.x,
            y: p.y,
            speed: p.speed,
        });
        if mode.train_mode {
            if let Some(t) = Termination::from_events(&ev) {
                traj.termination = Some(t);
                break;
            }
        }
    }
    Ok(traj)
}

/// Draws a categorical index from `probs`.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Code for a new trial. `posterior` is the averaged burn-in posterior and
/// is only consulted by Burn-InfoGAIL; `voted` selects its majority vote
/// instead of a sample.
pub fn draw_code<R: Rng + ?Sized>(
    algorithm: Algorithm,
    posterior: Option<(&[f64; CODE_DIM], usize)>,
    voted: bool,
    rng: &mut R,
) -> Option<usize> {
    match algorithm {
        Algorithm::Gail => None,
        Algorithm::Infogail => Some(rng.random_range(0..CODE_DIM)),
        Algorithm::BurnInfogail => {
            let (p, vote) = posterior.expect("burn-in posterior required");
            Some(if voted { vote } else { sample_categorical(p, rng) })
        }
    }
}

/// Critic and inference input rows for a trajectory.
pub fn pair_rows(traj: &Trajectory, out: &mut Vec<f64>) {
    let d = crate::simulator::OBS_DIM;
    for (i, a) in traj.actions.iter().enumerate() {
        out.extend_from_slice(&traj.features[i * d..(i + 1) * d]);
        out.extend_from_slice(a);
    }
}
