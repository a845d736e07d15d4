//! Run configuration, run directories and the end-to-end commands behind
//! the command-line tool.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.toml                 resolved configuration of the dataset
//! data/{train,val}.jsonl      demonstrations
//! data/manifest.json
//! train/<algorithm>/          config.toml, metrics.csv, latest.ckpt, best.ckpt
//! eval/<algorithm>/           ami.csv, rmse.csv, events.csv, traces.jsonl, embedding.csv
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    event_frequencies, eval_rollouts, forced_code_traces, inferred_labels, kmeans_labels, rmse_curves, validation_ami,
    write_ami, write_embedding, write_events, write_rmse, write_traces, AmiRow, CodeSource, EventFrequencies, RmseCurves,
};
use crate::experts::{class_histogram, generate_split, read_jsonl, write_jsonl, Demonstration, ExpertConfig, Horizon, Split};
use crate::models::{ModelConfig, Models};
use crate::numerics::Checkpoint;
use crate::simulator::SimConfig;
use crate::trainer::{Algorithm, EgoDriver, Env, ExpertPairs, RunPaths, TrainConfig, TrainState, Trainer};
use crate::trpo::TrpoConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Which training checkpoint evaluation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointChoice {
    Latest,
    /// Highest validation AMI seen at a checkpoint; falls back to latest
    /// for GAIL.
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_rollouts: usize,
    pub horizon: usize,
    pub kmeans_restarts: usize,
    /// Trials per forced code in the trace export.
    pub export_trials: usize,
    pub checkpoint: CheckpointChoice,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_rollouts: 1000,
            horizon: 300,
            kmeans_restarts: 10,
            export_trials: 10,
            checkpoint: CheckpointChoice::Latest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub burn_in: usize,
    pub continuation: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        let h = Horizon::default();
        Self {
            n_train: 960,
            n_val: 480,
            burn_in: h.burn_in,
            continuation: h.continuation,
        }
    }
}

impl DataConfig {
    pub fn horizon(&self) -> Horizon {
        Horizon {
            burn_in: self.burn_in,
            continuation: self.continuation,
        }
    }
}

/// Every setting of a run. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub data: DataConfig,
    pub sim: SimConfig,
    pub experts: ExpertConfig,
    pub models: ModelConfig,
    pub train: TrainConfig,
    pub trpo: TrpoConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            data: DataConfig::default(),
            sim: SimConfig::default(),
            experts: ExpertConfig::default(),
            models: ModelConfig::default(),
            train: TrainConfig::default(),
            trpo: TrpoConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|_| Error::Missing { path: path.into() })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "config schema version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.sim.validate()?;
        self.experts.validate()?;
        self.models.validate()?;
        self.train.validate()?;
        self.trpo.validate()?;
        if self.data.n_train == 0 || self.data.burn_in == 0 {
            return Err(Error::invalid("data", "n_train and burn_in must be >= 1"));
        }
        if self.eval.horizon > self.data.continuation {
            return Err(Error::invalid(
                "eval.horizon",
                format!("{} exceeds the recorded continuation {}", self.eval.horizon, self.data.continuation),
            ));
        }
        Ok(())
    }

    pub fn env(&self) -> Env<'_> {
        Env {
            sim: &self.sim,
            experts: &self.experts,
            models: &self.models,
        }
    }
}

/// Dataset summary written next to the JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub burn_in: usize,
    pub continuation: usize,
    pub train_class_counts: [usize; 4],
    pub val_class_counts: [usize; 4],
}

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn split(&self, split: Split) -> PathBuf {
        self.data().join(format!("{}.jsonl", split.name()))
    }

    pub fn manifest(&self) -> PathBuf {
        self.data().join("manifest.json")
    }

    pub fn train(&self, algo: Algorithm) -> PathBuf {
        self.root.join("train").join(algo.name())
    }

    pub fn eval(&self, algo: Algorithm) -> PathBuf {
        self.root.join("eval").join(algo.name())
    }
}

fn non_empty(dir: &Path) -> bool {
    fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false)
}

fn write_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    fs::write(path, cfg.to_toml()?)?;
    Ok(())
}

/// Generates both dataset splits. Refuses to touch a non-empty data
/// directory unless `force` is set.
pub fn gen_demos(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<Manifest> {
    cfg.validate()?;
    let data = run.data();
    if non_empty(&data) {
        if !force {
            return Err(Error::WouldOverwrite { path: data });
        }
        fs::remove_dir_all(&data)?;
    }
    fs::create_dir_all(&data)?;
    write_config(cfg, &run.config())?;
    let h = cfg.data.horizon();
    let mut counts = [[0; 4]; 2];
    for (i, (split, n)) in [(Split::Train, cfg.data.n_train), (Split::Val, cfg.data.n_val)].into_iter().enumerate() {
        let demos = generate_split(&cfg.sim, &cfg.experts, h, cfg.seed, split, n)?;
        counts[i] = class_histogram(&demos);
        write_jsonl(&demos, BufWriter::new(File::create(run.split(split))?))?;
    }
    let manifest = Manifest {
        schema_version: crate::experts::DATASET_SCHEMA_VERSION,
        seed: cfg.seed,
        n_train: cfg.data.n_train,
        n_val: cfg.data.n_val,
        burn_in: h.burn_in,
        continuation: h.continuation,
        train_class_counts: counts[0],
        val_class_counts: counts[1],
    };
    fs::write(run.manifest(), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_split(run: &RunDir, split: Split) -> Result<Vec<Demonstration>> {
    let path = run.split(split);
    let file = File::open(&path).map_err(|_| Error::Missing { path })?;
    read_jsonl(BufReader::new(file))
}

/// Trains `cfg.train.algorithm`, resuming from the latest checkpoint unless
/// `force` asks for a fresh start.
pub fn train(cfg: &RunConfig, run: &RunDir, force: bool) -> Result<TrainState> {
    cfg.validate()?;
    let train = load_split(run, Split::Train)?;
    let val = load_split(run, Split::Val)?;
    let dir = run.train(cfg.train.algorithm);
    if force && dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let cfg_path = dir.join("config.toml");
    if cfg_path.exists() && RunPaths::new(&dir).latest.exists() {
        let previous = RunConfig::load(&cfg_path)?;
        let same_run = RunConfig {
            train: TrainConfig {
                iterations: cfg.train.iterations,
                ..previous.train
            },
            ..previous
        };
        if &same_run != cfg {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration (use --force to restart)",
                dir.display()
            )));
        }
    }
    write_config(cfg, &cfg_path)?;
    let trainer = Trainer::new(cfg.env(), &cfg.train, &cfg.trpo, cfg.seed, &train, &val)?;
    trainer.run(&dir, true)
}

/// Loads the checkpoint that evaluation uses.
pub fn load_models(cfg: &RunConfig, run: &RunDir) -> Result<Models> {
    let paths = RunPaths::new(&run.train(cfg.train.algorithm));
    let path = match cfg.eval.checkpoint {
        CheckpointChoice::Best if paths.best.exists() => paths.best,
        _ => paths.latest,
    };
    Models::load_from(&cfg.models, &Checkpoint::load(&path)?)
}

/// Results of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ami: Vec<AmiRow>,
    pub rmse: RmseCurves,
    pub events: EventFrequencies,
    pub rmse_with_replacement: bool,
}

impl EvalReport {
    pub fn ami_of(&self, method: &str, split: &str) -> Option<f64> {
        self.ami.iter().find(|r| r.method == method && r.split == split).map(|r| r.ami)
    }
}

/// Evaluates the trained model on the validation split and writes the CSVs
/// and exports into `eval/<algorithm>/`.
pub fn evaluate(cfg: &RunConfig, run: &RunDir) -> Result<EvalReport> {
    cfg.validate()?;
    let algo = cfg.train.algorithm;
    let train = load_split(run, Split::Train)?;
    let val = load_split(run, Split::Val)?;
    let models = load_models(cfg, run)?;
    let env = cfg.env();
    let train_pairs = ExpertPairs::build(env, &train);
    let val_pairs = ExpertPairs::build(env, &val);

    let mut ami = Vec::new();
    if algo.uses_codes() {
        for (split, pairs, demos) in [("train", &train_pairs, &train), ("val", &val_pairs, &val)] {
            let labels = inferred_labels(&models.inference, pairs)?;
            ami.push(AmiRow {
                method: algo.name().into(),
                split: split.into(),
                ami: validation_ami(&labels, demos)?.value,
            });
        }
    }
    let km = kmeans_labels(&train_pairs, &val_pairs, cfg.seed, cfg.eval.kmeans_restarts)?;
    ami.push(AmiRow {
        method: "kmeans".into(),
        split: "val".into(),
        ami: validation_ami(&km, &val)?.value,
    });

    let codes = match algo {
        Algorithm::BurnInfogail => CodeSource::Inferred(&models.inference, &val_pairs),
        Algorithm::Infogail => CodeSource::Uniform,
        Algorithm::Gail => CodeSource::Unconditioned,
    };
    let runs = eval_rollouts(
        env,
        EgoDriver::Policy(&models.policy),
        codes,
        &val,
        cfg.eval.n_rollouts,
        cfg.eval.horizon,
        cfg.seed,
    )?;
    if runs.with_replacement {
        log::warn!(
            "{} rollouts requested from {} validation demonstrations; sampling with replacement",
            cfg.eval.n_rollouts,
            val.len()
        );
    }
    let report = EvalReport {
        ami,
        rmse: rmse_curves(env, &val, &runs)?,
        events: event_frequencies(&runs),
        rmse_with_replacement: runs.with_replacement,
    };

    let dir = run.eval(algo);
    fs::create_dir_all(&dir)?;
    write_config(cfg, &dir.join("config.toml"))?;
    write_ami(&report.ami, BufWriter::new(File::create(dir.join("ami.csv"))?))?;
    write_rmse(&report.rmse, BufWriter::new(File::create(dir.join("rmse.csv"))?))?;
    write_events(&report.events, BufWriter::new(File::create(dir.join("events.csv"))?))?;
    export_with(cfg, &models, &val, &dir)?;
    Ok(report)
}

fn export_with(cfg: &RunConfig, models: &Models, val: &[Demonstration], dir: &Path) -> Result<()> {
    let rows = forced_code_traces(
        cfg.env(),
        &models.policy,
        cfg.train.algorithm.uses_codes(),
        val,
        cfg.eval.export_trials,
        cfg.eval.horizon,
    )?;
    write_traces(&rows, BufWriter::new(File::create(dir.join("traces.jsonl"))?))?;
    write_embedding(&models.policy, BufWriter::new(File::create(dir.join("embedding.csv"))?))
}

/// Writes only the trace and embedding exports.
pub fn export(cfg: &RunConfig, run: &RunDir) -> Result<PathBuf> {
    cfg.validate()?;
    let val = load_split(run, Split::Val)?;
    let models = load_models(cfg, run)?;
    let dir = run.eval(cfg.train.algorithm);
    fs::create_dir_all(&dir)?;
    export_with(cfg, &models, &val, &dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.seed = 3;
        cfg.data = DataConfig {
            n_train: 4,
            n_val: 4,
            burn_in: 6,
            continuation: 12,
        };
        cfg.experts.vehicles_per_scene = 4;
        cfg.train = TrainConfig {
            horizon: 10,
            rollout_steps: 20,
            critic_batch: 16,
            inference_batch: 16,
            entropy_burn_ins: 2,
            iterations: 2,
            checkpoint_every: 1,
            ..TrainConfig::default()
        };
        cfg.eval = EvalConfig {
            n_rollouts: 4,
            horizon: 12,
            kmeans_restarts: 2,
            export_trials: 2,
            checkpoint: CheckpointChoice::Latest,
        };
        cfg
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = desk();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        let partial = RunConfig::from_toml("seed = 9\n[train]\nlambda = 0.0\n").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.train.lambda, 0.0);
        assert_eq!(partial.train.eta, TrainConfig::default().eta);
    }

    #[test]
    fn unknown_keys_and_foreign_schema_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[train]\nlamda = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("schema_version = 2\n"), Err(Error::Schema(_))));
        let bad = RunConfig::from_toml("[eval]\nhorizon = 400\n").unwrap_err();
        assert!(bad.is_config_error());
    }

    #[test]
    fn missing_config_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope.toml");
        match RunConfig::load(&path) {
            Err(Error::Missing { path: p }) => assert_eq!(p, path),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gen_demos_refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::new(dir.path());
        let cfg = desk();
        let m = gen_demos(&cfg, &run, false).unwrap();
        assert_eq!((m.n_train, m.n_val), (4, 4));
        assert_eq!(m.train_class_counts, [1; 4]);
        let first = fs::read(run.split(Split::Train)).unwrap();
        assert!(matches!(gen_demos(&cfg, &run, false), Err(Error::WouldOverwrite { .. })));
        gen_demos(&cfg, &run, true).unwrap();
        assert_eq!(fs::read(run.split(Split::Train)).unwrap(), first);
        assert_eq!(RunConfig::load(&run.config()).unwrap(), cfg);
    }

    #[test]
    fn train_without_dataset_names_the_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::new(dir.path());
        match train(&desk(), &run, false) {
            Err(Error::Missing { path }) => assert_eq!(path, run.split(Split::Train)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn end_to_end_outputs_are_reproducible() {
        let outputs = |cfg: &RunConfig| {
            let dir = tempfile::tempdir().unwrap();
            let run = RunDir::new(dir.path());
            gen_demos(cfg, &run, false).unwrap();
            train(cfg, &run, false).unwrap();
            let report = evaluate(cfg, &run).unwrap();
            assert_eq!(report.rmse.position[0], 0.0);
            assert_eq!(report.rmse.speed[0], 0.0);
            let eval = run.eval(cfg.train.algorithm);
            ["ami.csv", "rmse.csv", "events.csv", "traces.jsonl", "embedding.csv"]
                .map(|f| fs::read(eval.join(f)).unwrap())
        };
        let cfg = desk();
        assert_eq!(outputs(&cfg), outputs(&cfg));
    }

    #[test]
    fn resume_refuses_a_changed_config() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::new(dir.path());
        let mut cfg = desk();
        gen_demos(&cfg, &run, false).unwrap();
        train(&cfg, &run, false).unwrap();
        cfg.train.iterations = 3;
        assert_eq!(train(&cfg, &run, false).unwrap().iteration, 3);
        cfg.train.lambda = 1.0;
        assert!(matches!(train(&cfg, &run, false), Err(Error::Config(_))));
        assert_eq!(train(&cfg, &run, true).unwrap().iteration, 3);
    }
}
