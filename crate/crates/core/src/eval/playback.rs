//! Evaluation rollouts: playback error against the recorded expert
//! continuation and dangerous-event frequencies.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::Demonstration;
use crate::models::{Inference, CODE_DIM};
use crate::rng::{stream, streams};
use crate::trainer::{rollout, EgoDriver, Env, ExpertPairs, RolloutMode, Trajectory};

/// Where evaluation codes come from.
#[derive(Debug, Clone, Copy)]
pub enum CodeSource<'a> {
    /// Majority vote of the inference network on the demonstration burn-in.
    Inferred(&'a Inference, &'a ExpertPairs),
    Uniform,
    /// No code (plain GAIL).
    Unconditioned,
}

/// Evaluation rollouts from sampled handoff scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRollouts {
    pub trajectories: Vec<Trajectory>,
    pub horizon: usize,
    /// More rollouts than demonstrations were requested, so demonstrations
    /// were drawn with replacement.
    pub with_replacement: bool,
}

/// Demonstration indices for `n` rollouts: a random subset without
/// replacement when possible, otherwise uniform draws with replacement.
pub fn sample_demos(n_demos: usize, n: usize, seed: u64) -> Result<(Vec<usize>, bool)> {
    if n_demos == 0 {
        return Err(Error::Empty("evaluation demonstrations"));
    }
    let mut rng = stream(seed, streams::EVAL, &[0]);
    if n <= n_demos {
        let mut idx = sample(&mut rng, n_demos, n).into_vec();
        idx.sort_unstable();
        Ok((idx, false))
    } else {
        Ok(((0..n).map(|_| rng.random_range(0..n_demos)).collect(), true))
    }
}

/// Rolls the driver out from `n_rollouts` sampled demonstrations without
/// early termination. Policy actions are the Gaussian mean.
pub fn eval_rollouts(
    env: Env<'_>,
    driver: EgoDriver<'_>,
    codes: CodeSource<'_>,
    demos: &[Demonstration],
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<EvalRollouts> {
    if let Some(d) = demos.iter().find(|d| d.expert_continuation.len() < horizon) {
        return Err(Error::invalid(
            "horizon",
            format!("{horizon} exceeds the recorded continuation ({} steps) of demo {}", d.expert_continuation.len(), d.id),
        ));
    }
    let (idx, with_replacement) = sample_demos(demos.len(), n_rollouts, seed)?;
    let votes = match codes {
        CodeSource::Inferred(inf, pairs) => Some(pairs.infer(inf)?),
        _ => None,
    };
    let mode = RolloutMode {
        horizon,
        train_mode: false,
        deterministic: true,
    };
    let trajectories = idx
        .par_iter()
        .enumerate()
        .map(|(r, &d)| {
            let mut rng = stream(seed, streams::EVAL, &[1, r as u64]);
            let code = match codes {
                CodeSource::Inferred(..) => Some(votes.as_ref().expect("votes")[d].vote),
                CodeSource::Uniform => Some(rng.random_range(0..CODE_DIM)),
                CodeSource::Unconditioned => None,
            };
            rollout(env, driver, code, &demos[d], d, mode, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalRollouts {
        trajectories,
        horizon,
        with_replacement,
    })
}

/// Per-step RMSE of speed and global position against the expert
/// continuation; index 0 is the shared handoff state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseCurves {
    pub speed: Vec<f64>,
    pub position: Vec<f64>,
    pub n_rollouts: usize,
}

pub fn rmse_curves(env: Env<'_>, demos: &[Demonstration], runs: &EvalRollouts) -> Result<RmseCurves> {
    let n = runs.trajectories.len();
    if n == 0 {
        return Err(Error::Empty("rmse_curves"));
    }
    let h = runs.horizon;
    let mut se_v = vec![0.0; h + 1];
    let mut se_p = vec![0.0; h + 1];
    for traj in &runs.trajectories {
        let demo = &demos[traj.demo_index];
        if traj.len() != h {
            return Err(Error::shape("rmse_curves trajectory", h, traj.len()));
        }
        let start = demo.handoff_point(env.sim);
        let start = (start.x, start.y, start.speed);
        let pts = std::iter::once((start, start)).chain(
            traj.points
                .iter()
                .zip(&demo.expert_continuation)
                .map(|(m, e)| ((m.x, m.y, m.speed), (e.x, e.y, e.speed))),
        );
        for (t, (m, e)) in pts.enumerate() {
            se_v[t] += (m.2 - e.2).powi(2);
            se_p[t] += (m.0 - e.0).powi(2) + (m.1 - e.1).powi(2);
        }
    }
    let root = |v: Vec<f64>| v.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(RmseCurves {
        speed: root(se_v),
        position: root(se_p),
        n_rollouts: n,
    })
}

/// Fractions of evaluated timesteps with each event active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventFrequencies {
    pub offroad: f64,
    pub collision: f64,
    pub reversal: f64,
}

pub fn event_frequencies(runs: &EvalRollouts) -> EventFrequencies {
    let mut c = [0usize; 3];
    let mut total = 0usize;
    for t in &runs.trajectories {
        for e in &t.events {
            c[0] += usize::from(e.offroad);
            c[1] += usize::from(e.collision);
            c[2] += usize::from(e.reversal);
        }
        total += t.len();
    }
    let f = |k: usize| if total == 0 { 0.0 } else { c[k] as f64 / total as f64 };
    EventFrequencies {
        offroad: f(0),
        collision: f(1),
        reversal: f(2),
    }
}
