//! Plot-ready files: forced-code traces, the code embedding and metric CSVs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::playback::{EventFrequencies, RmseCurves};
use crate::error::{Error, Result};
use crate::experts::Demonstration;
use crate::models::{Policy, CODE_DIM};
use crate::rng::stream;
use crate::trainer::{rollout, EgoDriver, Env, RolloutMode};

/// One JSON line of a trace export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub code: Option<usize>,
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

/// Deterministic traces from the first `trials` demonstrations (cycling when
/// there are fewer) for every
/// forced code, or once without a code for unconditioned policies. Step 0
/// is the handoff state.
pub fn forced_code_traces(
    env: Env<'_>,
    policy: &Policy,
    coded: bool,
    demos: &[Demonstration],
    trials: usize,
    horizon: usize,
) -> Result<Vec<TraceRow>> {
    if demos.is_empty() {
        return Err(Error::Empty("trace export"));
    }
    let codes: Vec<Option<usize>> = if coded { (0..CODE_DIM).map(Some).collect() } else { vec![None] };
    let mode = RolloutMode {
        horizon,
        train_mode: false,
        deterministic: true,
    };
    let mut rows = Vec::new();
    let mut trial = 0;
    for code in codes {
        for j in 0..trials {
            let d = j % demos.len();
            let demo = &demos[d];
            // Deterministic actions never touch the stream.
            let traj = rollout(env, EgoDriver::Policy(policy), code, demo, d, mode, &mut stream(0, "export", &[]))?;
            let p0 = demo.handoff_point(env.sim);
            rows.push(TraceRow { trial, code, step: 0, x: p0.x, y: p0.y, v: p0.speed });
            for (i, p) in traj.points.iter().enumerate() {
                rows.push(TraceRow { trial, code, step: i + 1, x: p.x, y: p.y, v: p.speed });
            }
            trial += 1;
        }
    }
    Ok(rows)
}

pub fn write_traces<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// The code embedding as CSV: header `code,e0..e15`, one row per code.
pub fn write_embedding<W: Write>(policy: &Policy, mut out: W) -> Result<()> {
    let dim = policy.embedding.ncols();
    let head: Vec<String> = (0..dim).map(|j| format!("e{j}")).collect();
    writeln!(out, "code,{}", head.join(","))?;
    for (k, row) in policy.embedding.rows().into_iter().enumerate() {
        let vals: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{k},{}", vals.join(","))?;
    }
    Ok(())
}

pub fn write_rmse<W: Write>(c: &RmseCurves, mut out: W) -> Result<()> {
    writeln!(out, "t,rmse_speed,rmse_pos")?;
    for (t, (v, p)) in c.speed.iter().zip(&c.position).enumerate() {
        writeln!(out, "{t},{v},{p}")?;
    }
    Ok(())
}

pub fn write_events<W: Write>(e: &EventFrequencies, mut out: W) -> Result<()> {
    writeln!(out, "offroad,collision,reversal")?;
    writeln!(out, "{},{},{}", e.offroad, e.collision, e.reversal)?;
    Ok(())
}

/// One row of `ami.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmiRow {
    pub method: String,
    pub split: String,
    pub ami: f64,
}

pub fn write_ami<W: Write>(rows: &[AmiRow], mut out: W) -> Result<()> {
    writeln!(out, "method,split,ami")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.method, r.split, r.ami)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{generate_split, ExpertConfig, Horizon, Split};
    use crate::models::{ModelConfig, PolicyConfig};
    use crate::simulator::SimConfig;

    #[test]
    fn forced_code_export_shape_and_stability() {
        let sim = SimConfig::default();
        let ex = ExpertConfig { vehicles_per_scene: 4, ..ExpertConfig::default() };
        let mc = ModelConfig::default();
        let env = Env { sim: &sim, experts: &ex, models: &mc };
        let demos = generate_split(&sim, &ex, Horizon { burn_in: 5, continuation: 5 }, 8, Split::Val, 3).unwrap();
        let policy = Policy::init(&PolicyConfig::default(), &mut stream(1, "p", &[])).unwrap();
        let rows = forced_code_traces(env, &policy, true, &demos, 10, 6).unwrap();
        assert_eq!(rows.len(), 4 * 10 * 7);
        let trials: std::collections::BTreeSet<_> = rows.iter().map(|r| (r.trial, r.code)).collect();
        assert_eq!(trials.len(), 40);
        let mut a = Vec::new();
        write_traces(&rows, &mut a).unwrap();
        let mut b = Vec::new();
        write_traces(&forced_code_traces(env, &policy, true, &demos, 10, 6).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);

        let mut emb = Vec::new();
        write_embedding(&policy, &mut emb).unwrap();
        let text = String::from_utf8(emb).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().all(|l| l.split(',').count() == 17));

        let gail = forced_code_traces(env, &policy, false, &demos, 10, 6).unwrap();
        assert!(gail.iter().all(|r| r.code.is_none()));
        assert_eq!(gail.len(), 10 * 7);
    }
}
