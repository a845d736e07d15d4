//! Command-line driver: dataset generation, training, evaluation and export.

use std::path::PathBuf;
use std::process::ExitCode;

use burn_infogail::pipeline::{self, RunConfig, RunDir};
use burn_infogail::trainer::Algorithm;
use burn_infogail::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "burn-infogail", version, about = "Burn-in conditioned imitation of multi-style drivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate training and validation demonstrations.
    GenDemos,
    /// Train (or resume) a model on the run's dataset.
    Train,
    /// Evaluate a trained model and write CSVs and exports.
    Eval,
    /// Write trajectory and embedding exports only.
    Export,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "runs/default")]
    run_dir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// gail, infogail or burn_infogail
    #[arg(long, global = true)]
    algorithm: Option<Algorithm>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    n_train: Option<usize>,
    #[arg(long, global = true)]
    n_val: Option<usize>,
    #[arg(long, global = true)]
    n_rollouts: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overwrite existing outputs (and restart training from scratch).
    #[arg(long, global = true)]
    force: bool,
}

/// Config file (or the run directory's saved config) overlaid with flags.
fn resolve(cmd: &Command, c: &Common) -> burn_infogail::Result<RunConfig> {
    let run = RunDir::new(&c.run_dir);
    let mut cfg = match (&c.config, cmd) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Command::GenDemos) => RunConfig::default(),
        (None, _) if run.config().exists() => RunConfig::load(&run.config())?,
        (None, _) => RunConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.algorithm {
        cfg.train.algorithm = v;
    }
    if let Some(v) = c.lambda {
        if cfg.train.algorithm != Algorithm::BurnInfogail {
            log::warn!("--lambda has no effect for {}", cfg.train.algorithm.name());
        }
        cfg.train.lambda = v;
    }
    if let Some(v) = c.eta {
        if cfg.train.algorithm == Algorithm::Gail {
            log::warn!("--eta has no effect for gail");
        }
        cfg.train.eta = v;
    }
    if let Some(v) = c.iters {
        cfg.train.iterations = v;
    }
    if let Some(v) = c.n_train {
        cfg.data.n_train = v;
    }
    if let Some(v) = c.n_val {
        cfg.data.n_val = v;
    }
    if let Some(v) = c.n_rollouts {
        cfg.eval.n_rollouts = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> burn_infogail::Result<()> {
    let cfg = resolve(&cli.command, &cli.common)?;
    let dir = RunDir::new(&cli.common.run_dir);
    match cli.command {
        Command::GenDemos => {
            let m = pipeline::gen_demos(&cfg, &dir, cli.common.force)?;
            println!(
                "wrote {} train and {} val demonstrations to {}",
                m.n_train,
                m.n_val,
                dir.data().display()
            );
        }
        Command::Train => {
            let st = pipeline::train(&cfg, &dir, cli.common.force)?;
            println!(
                "trained {} for {} iterations in {}",
                cfg.train.algorithm.name(),
                st.iteration,
                dir.train(cfg.train.algorithm).display()
            );
        }
        Command::Eval => {
            let r = pipeline::evaluate(&cfg, &dir)?;
            for row in &r.ami {
                println!("ami {} {}: {:.4}", row.method, row.split, row.ami);
            }
            let last = r.rmse.position.len() - 1;
            println!(
                "rmse at t={last}: position {:.3} m, speed {:.3} m/s",
                r.rmse.position[last], r.rmse.speed[last]
            );
            println!(
                "events: offroad {:.4} collision {:.4} reversal {:.4}",
                r.events.offroad, r.events.collision, r.events.reversal
            );
        }
        Command::Export => {
            let out = pipeline::export(&cfg, &dir)?;
            println!("exports written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(3);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::TrainingFault { .. }) || !e.is_config_error() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
