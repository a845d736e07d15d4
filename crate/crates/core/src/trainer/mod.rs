//! Adversarial imitation training: GAIL, InfoGAIL and Burn-InfoGAIL.

mod config;
mod rollout;
mod state;
mod updates;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

pub use config::{Algorithm, CodeSampling, TrainConfig};
pub use rollout::{draw_code, EgoDriver, pair_rows, rollout, sample_categorical, Env, RolloutMode, Termination, Trajectory};
pub use state::TrainState;
pub use updates::{composite_reward, critic_update, inference_update, style_log_prob, InferenceStats};

use crate::error::{Error, Result};
use crate::eval::ami;
use crate::experts::Demonstration;
use crate::models::{aggregate, Inference, TrajectoryInference, ACTION_DIM, CODE_DIM, PAIR_DIM};
use crate::rng::{stream, streams};
use crate::simulator::OBS_DIM;
use crate::trpo::{compute_advantages, trpo_step, AdvantageBatch, PolicyInput, TrpoConfig};

/// Expert burn-in pairs of a set of demonstrations, stacked row-wise.
#[derive(Debug, Clone)]
pub struct ExpertPairs {
    pub rows: Array2<f64>,
    offsets: Vec<usize>,
}

impl ExpertPairs {
    pub fn build(env: Env<'_>, demos: &[Demonstration]) -> Self {
        let mut data = Vec::new();
        let mut offsets = vec![0];
        for d in demos {
            for st in &d.burn_in {
                data.extend(env.models.pair_row(env.sim, &st.obs, env.models.normalize(st.action)));
            }
            offsets.push(offsets.last().unwrap() + d.burn_in.len());
        }
        let n = *offsets.last().unwrap();
        Self {
            rows: Array2::from_shape_vec((n, PAIR_DIM), data).expect("pair layout"),
            offsets,
        }
    }

    pub fn n_demos(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn demo(&self, i: usize) -> ArrayView2<'_, f64> {
        self.rows.slice(s![self.offsets[i]..self.offsets[i + 1], ..])
    }

    /// Trajectory-level inference for every demonstration.
    pub fn infer(&self, inference: &Inference) -> Result<Vec<TrajectoryInference>> {
        let post = inference.posteriors(self.rows.view())?;
        (0..self.n_demos())
            .map(|i| aggregate(&post[self.offsets[i]..self.offsets[i + 1]]))
            .collect()
    }
}

/// AMI between majority-vote codes and the true style classes.
pub fn vote_ami(inference: &Inference, pairs: &ExpertPairs, demos: &[Demonstration]) -> Result<f64> {
    let votes: Vec<usize> = pairs.infer(inference)?.iter().map(|t| t.vote).collect();
    let truth: Vec<usize> = demos.iter().map(|d| d.style_class.index()).collect();
    Ok(ami(&truth, &votes)?.value)
}

/// One row of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub iter: usize,
    pub wasserstein: f64,
    pub ce: f64,
    pub entropy: f64,
    pub mean_return: f64,
    pub freq_z: [f64; CODE_DIM],
    pub train_ami: f64,
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub cg_residual: f64,
    pub backtrack_steps: usize,
}

pub const METRICS_HEADER: &str = "iter,wasserstein,ce,entropy,mean_return,freq_z0,freq_z1,freq_z2,freq_z3,train_ami,kl,surrogate_before,surrogate_after,cg_residual,backtrack_steps";

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        let f = self.freq_z;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.wasserstein,
            self.ce,
            self.entropy,
            self.mean_return,
            f[0],
            f[1],
            f[2],
            f[3],
            self.train_ami,
            self.kl,
            self.surrogate_before,
            self.surrogate_after,
            self.cg_residual,
            self.backtrack_steps
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let v: Vec<&str> = line.trim().split(',').collect();
        if v.len() != 15 {
            return Err(Error::Schema(format!("metrics row has {} fields", v.len())));
        }
        let num = |i: usize| v[i].parse::<f64>().map_err(|e| Error::Schema(format!("metrics field {i}: {e}")));
        let int = |i: usize| v[i].parse::<usize>().map_err(|e| Error::Schema(format!("metrics field {i}: {e}")));
        Ok(Self {
            iter: int(0)?,
            wasserstein: num(1)?,
            ce: num(2)?,
            entropy: num(3)?,
            mean_return: num(4)?,
            freq_z: [num(5)?, num(6)?, num(7)?, num(8)?],
            train_ami: num(9)?,
            kl: num(10)?,
            surrogate_before: num(11)?,
            surrogate_after: num(12)?,
            cg_residual: num(13)?,
            backtrack_steps: int(14)?,
        })
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<IterationMetrics>> {
    let file = File::open(path).map_err(|_| Error::Missing { path: path.into() })?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(METRICS_HEADER) {
        return Err(Error::Schema(format!("{} lacks the metrics header", path.display())));
    }
    lines
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| IterationMetrics::parse_csv_row(&l?))
        .collect()
}

/// Fixed inputs of a training run.
pub struct Trainer<'a> {
    pub env: Env<'a>,
    pub cfg: &'a TrainConfig,
    pub trpo: &'a TrpoConfig,
    pub seed: u64,
    pub train: &'a [Demonstration],
    pub val: &'a [Demonstration],
    train_pairs: ExpertPairs,
    val_pairs: ExpertPairs,
}

/// Flattened rollout batch of one iteration.
struct Batch {
    pairs: Array2<f64>,
    codes: Vec<Option<usize>>,
    dones: Vec<bool>,
    steps: Vec<usize>,
    traj_len: Vec<usize>,
}

fn flatten(trajs: &[Trajectory]) -> Batch {
    let n: usize = trajs.iter().map(Trajectory::len).sum();
    let mut data = Vec::with_capacity(n * PAIR_DIM);
    let mut codes = Vec::with_capacity(n);
    let mut dones = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    for t in trajs {
        pair_rows(t, &mut data);
        for i in 0..t.len() {
            codes.push(t.code);
            dones.push(i + 1 == t.len());
            steps.push(i);
        }
    }
    Batch {
        pairs: Array2::from_shape_vec((n, PAIR_DIM), data).expect("pair layout"),
        codes,
        dones,
        steps,
        traj_len: trajs.iter().map(Trajectory::len).collect(),
    }
}

fn sample_rows<R: Rng + ?Sized>(m: ArrayView2<f64>, n: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((n, m.ncols()));
    for mut row in out.rows_mut() {
        row.assign(&m.row(rng.random_range(0..m.nrows())));
    }
    out
}

impl<'a> Trainer<'a> {
    pub fn new(
        env: Env<'a>,
        cfg: &'a TrainConfig,
        trpo: &'a TrpoConfig,
        seed: u64,
        train: &'a [Demonstration],
        val: &'a [Demonstration],
    ) -> Result<Self> {
        cfg.validate()?;
        trpo.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training demonstrations"));
        }
        if train.iter().chain(val).any(|d| d.burn_in.is_empty()) {
            return Err(Error::Empty("demonstration burn-in"));
        }
        Ok(Self {
            env,
            cfg,
            trpo,
            seed,
            train,
            val,
            train_pairs: ExpertPairs::build(env, train),
            val_pairs: ExpertPairs::build(env, val),
        })
    }

    pub fn train_pairs(&self) -> &ExpertPairs {
        &self.train_pairs
    }

    pub fn val_pairs(&self) -> &ExpertPairs {
        &self.val_pairs
    }

    /// Validation AMI of the inference network's votes; `None` for GAIL.
    pub fn val_ami(&self, state: &TrainState) -> Result<Option<f64>> {
        if !self.cfg.algorithm.uses_codes() || self.val.is_empty() {
            return Ok(None);
        }
        vote_ami(&state.models.inference, &self.val_pairs, self.val).map(Some)
    }

    fn collect(&self, state: &TrainState, burn: &[TrajectoryInference], iter: u64) -> Result<Vec<Trajectory>> {
        let wave = self.cfg.rollout_steps.div_ceil(self.cfg.horizon);
        let mode = RolloutMode {
            horizon: self.cfg.horizon,
            train_mode: true,
            deterministic: false,
        };
        let voted = self.cfg.code_sampling == CodeSampling::Voted;
        let mut trajs: Vec<Trajectory> = Vec::new();
        let mut total = 0;
        while total < self.cfg.rollout_steps {
            let start = trajs.len() as u64;
            let batch: Vec<Trajectory> = (start..start + wave as u64)
                .into_par_iter()
                .map(|id| {
                    let mut rng = stream(self.seed, streams::ROLLOUT, &[iter, id]);
                    let demo = rng.random_range(0..self.train.len());
                    let post = burn.get(demo).map(|t| (&t.avg_posterior, t.vote));
                    let code = draw_code(self.cfg.algorithm, post, voted, &mut rng);
                    rollout(self.env, EgoDriver::Policy(&state.models.policy), code, &self.train[demo], demo, mode, &mut rng)
                })
                .collect::<Result<_>>()?;
            total += batch.iter().map(Trajectory::len).sum::<usize>();
            trajs.extend(batch);
        }
        Ok(trajs)
    }

    /// Runs one iteration on `state` and advances its counter.
    pub fn iterate(&self, state: &mut TrainState) -> Result<IterationMetrics> {
        let iter = state.iteration as u64;
        let algo = self.cfg.algorithm;
        let nan = f64::NAN;

        // (1) burn-in inference for the code distributions
        let burn = if algo.uses_codes() {
            self.train_pairs.infer(&state.models.inference)?
        } else {
            Vec::new()
        };
        let (freq_z, train_ami) = match algo {
            Algorithm::Gail => ([nan; CODE_DIM], nan),
            _ => {
                let mut f = [0.0; CODE_DIM];
                for t in &burn {
                    for k in 0..CODE_DIM {
                        f[k] += match (algo, self.cfg.code_sampling) {
                            (Algorithm::Infogail, _) => 1.0 / CODE_DIM as f64,
                            (_, CodeSampling::Voted) => f64::from(u8::from(t.vote == k)),
                            _ => t.avg_posterior[k],
                        };
                    }
                }
                f.iter_mut().for_each(|v| *v /= burn.len() as f64);
                let votes: Vec<usize> = burn.iter().map(|t| t.vote).collect();
                let truth: Vec<usize> = self.train.iter().map(|d| d.style_class.index()).collect();
                (f, ami(&truth, &votes)?.value)
            }
        };

        // (2) rollouts
        let trajs = self.collect(state, &burn, iter)?;
        let batch = flatten(&trajs);
        let n = batch.codes.len();

        // (3) critic
        let mut w_sum = 0.0;
        for u in 0..self.cfg.critic_updates {
            let mut rng = stream(self.seed, streams::TRAIN, &[iter, 0, u as u64]);
            let e = sample_rows(self.train_pairs.rows.view(), self.cfg.critic_batch, &mut rng);
            let p = sample_rows(batch.pairs.view(), self.cfg.critic_batch, &mut rng);
            let loss = critic_update(&mut state.models.critic, &mut state.critic_opt, e.view(), p.view(), self.cfg.clip)?;
            w_sum -= loss;
        }
        let wasserstein = if self.cfg.critic_updates > 0 {
            w_sum / self.cfg.critic_updates as f64
        } else {
            nan
        };

        // (4) inference
        let (mut ce, mut entropy) = (nan, nan);
        if algo.uses_codes() && self.cfg.inference_updates > 0 {
            // Uniform codes carry no marginal to regularize.
            let lambda = if algo == Algorithm::BurnInfogail { self.cfg.lambda } else { 0.0 };
            let (mut ce_sum, mut h_sum) = (0.0, 0.0);
            for u in 0..self.cfg.inference_updates {
                let mut rng = stream(self.seed, streams::TRAIN, &[iter, 1, u as u64]);
                let idx: Vec<usize> = (0..self.cfg.inference_batch).map(|_| rng.random_range(0..n)).collect();
                let mut x = Array2::zeros((idx.len(), PAIR_DIM));
                for (mut row, &i) in x.rows_mut().into_iter().zip(&idx) {
                    row.assign(&batch.pairs.row(i));
                }
                let codes: Vec<usize> = idx.iter().map(|&i| batch.codes[i].expect("coded rollout")).collect();
                let burn_ins: Vec<ArrayView2<f64>> = (0..self.cfg.entropy_burn_ins)
                    .map(|_| self.train_pairs.demo(rng.random_range(0..self.train.len())))
                    .collect();
                let st = inference_update(&mut state.models.inference, &mut state.inference_opt, x.view(), &codes, &burn_ins, lambda)?;
                ce_sum += st.ce;
                h_sum += st.entropy;
            }
            ce = ce_sum / self.cfg.inference_updates as f64;
            entropy = h_sum / self.cfg.inference_updates as f64;
        }

        // (5) rewards and policy step
        let scores = state.models.critic.scores(batch.pairs.view())?;
        let posts = if algo.uses_codes() {
            state.models.inference.posteriors(batch.pairs.view())?
        } else {
            Vec::new()
        };
        let rewards: Vec<f64> = (0..n)
            .map(|i| {
                let lq = batch.codes[i].map(|z| style_log_prob(&posts[i], z));
                composite_reward(scores[i], lq, self.cfg.eta)
            })
            .collect();
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite { context: "rewards" });
        }
        let mean_return = rewards.iter().sum::<f64>() / batch.traj_len.len() as f64;

        let features = batch.pairs.slice(s![.., ..OBS_DIM]).to_owned();
        let actions = batch.pairs.slice(s![.., OBS_DIM..OBS_DIM + ACTION_DIM]).to_owned();
        let adv = compute_advantages(&rewards, &batch.dones, features.view(), &batch.steps, self.cfg.gamma, self.trpo.baseline)?;
        let input = PolicyInput {
            features,
            codes: batch.codes,
        };
        let tb = AdvantageBatch::new(&state.models.policy, &input, actions, adv.advantages)?;
        let diag = trpo_step(&mut state.models.policy, &input, &tb, self.trpo)?;

        state.iteration += 1;
        Ok(IterationMetrics {
            iter: state.iteration,
            wasserstein,
            ce,
            entropy,
            mean_return,
            freq_z,
            train_ami,
            kl: diag.kl,
            surrogate_before: diag.surrogate_before,
            surrogate_after: diag.surrogate_after,
            cg_residual: diag.cg_residual,
            backtrack_steps: diag.backtrack_steps,
        })
    }

    fn run_meta(&self) -> serde_json::Value {
        json!({ "algorithm": self.cfg.algorithm.name(), "seed": self.seed })
    }

    /// Trains for the configured number of iterations, writing
    /// `metrics.csv`, `latest.ckpt` and (for coded algorithms) `best.ckpt`
    /// into `out_dir`. With `resume`, continues from `latest.ckpt` when present.
    pub fn run(&self, out_dir: &Path, resume: bool) -> Result<TrainState> {
        fs::create_dir_all(out_dir)?;
        let paths = RunPaths::new(out_dir);
        let mut state = if resume && paths.latest.exists() {
            let st = TrainState::load(self.env.models, self.cfg, &paths.latest)?;
            truncate_metrics(&paths.metrics, st.iteration)?;
            log::info!("resuming {} at iteration {}", self.cfg.algorithm.name(), st.iteration);
            st
        } else {
            let st = TrainState::init(self.env.models, self.cfg, self.seed)?;
            fs::write(&paths.metrics, format!("{METRICS_HEADER}\n"))?;
            st
        };
        let mut metrics = fs::OpenOptions::new().append(true).open(&paths.metrics)?;
        while state.iteration < self.cfg.iterations {
            let it = state.iteration;
            let m = match self.iterate(&mut state) {
                Ok(m) => m,
                Err(e) => {
                    state.save(&paths.fault, self.run_meta())?;
                    return Err(Error::TrainingFault {
                        iteration: it + 1,
                        reason: e.to_string(),
                    });
                }
            };
            writeln!(metrics, "{}", m.csv_row())?;
            metrics.flush()?;
            log::info!(
                "{} iter {}: W {:.4} ce {:.4} H {:.4} return {:.2} ami {:.3}",
                self.cfg.algorithm.name(),
                m.iter,
                m.wasserstein,
                m.ce,
                m.entropy,
                m.mean_return,
                m.train_ami
            );
            if state.iteration % self.cfg.checkpoint_every == 0 || state.iteration == self.cfg.iterations {
                self.checkpoint(&mut state, &paths)?;
            }
        }
        Ok(state)
    }

    fn checkpoint(&self, state: &mut TrainState, paths: &RunPaths) -> Result<()> {
        if let Some(a) = self.val_ami(state)? {
            if state.best_val_ami.is_none_or(|b| a > b) {
                state.best_val_ami = Some(a);
                state.save(&paths.best, self.run_meta())?;
            }
        }
        state.save(&paths.latest, self.run_meta())
    }
}

/// File names inside a training directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub metrics: PathBuf,
    pub latest: PathBuf,
    pub best: PathBuf,
    pub fault: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            metrics: dir.join("metrics.csv"),
            latest: dir.join("latest.ckpt"),
            best: dir.join("best.ckpt"),
            fault: dir.join("fault.ckpt"),
        }
    }
}

fn truncate_metrics(path: &Path, keep: usize) -> Result<()> {
    let rows = if path.exists() { read_metrics(path)? } else { Vec::new() };
    if rows.len() < keep {
        return Err(Error::Schema(format!(
            "{} has {} rows but the checkpoint is at iteration {keep}",
            path.display(),
            rows.len()
        )));
    }
    let mut out = format!("{METRICS_HEADER}\n");
    for r in &rows[..keep] {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests;
