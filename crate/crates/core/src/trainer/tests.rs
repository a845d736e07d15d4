use ndarray::Array2;
use rand::Rng;

use super::*;
use crate::experts::{generate_demonstration, generate_split, ExpertConfig, Horizon, Split, StyleClass};
use crate::models::{Critic, Inference, ModelConfig, NetConfig, Policy, PolicyConfig};
use crate::numerics::{entropy, Adam, AdamConfig, RmsProp, RmsPropConfig};
use crate::simulator::{SimConfig, VehicleState};

fn small_experts() -> ExpertConfig {
    ExpertConfig {
        vehicles_per_scene: 4,
        ..ExpertConfig::default()
    }
}

fn policy(seed: u64) -> Policy {
    Policy::init(&PolicyConfig::default(), &mut stream(seed, "policy", &[])).unwrap()
}

#[test]
fn infogail_codes_are_uniform() {
    let mut rng = stream(3, "codes", &[]);
    let mut h = [0usize; CODE_DIM];
    for _ in 0..10_000 {
        h[draw_code(Algorithm::Infogail, None, false, &mut rng).unwrap()] += 1;
    }
    for c in h {
        assert!((c as f64 / 1e4 - 0.25).abs() < 0.02, "{h:?}");
    }
}

#[test]
fn burn_in_codes_follow_the_posterior() {
    let mut rng = stream(4, "codes", &[]);
    let one_hot = [0.0, 0.0, 0.0, 1.0];
    for _ in 0..1000 {
        assert_eq!(draw_code(Algorithm::BurnInfogail, Some((&one_hot, 3)), false, &mut rng), Some(3));
    }
    let p = [0.7, 0.1, 0.1, 0.1];
    assert_eq!(draw_code(Algorithm::BurnInfogail, Some((&p, 2)), true, &mut rng), Some(2));
    assert_eq!(draw_code(Algorithm::Gail, None, false, &mut rng), None);
}

#[test]
fn gail_code_adds_no_embedding() {
    let mut p = policy(1);
    let f = vec![0.1; OBS_DIM];
    let before = p.mean(&f, None).unwrap();
    p.embedding.fill(5.0);
    assert_eq!(p.mean(&f, None).unwrap(), before);
    assert_ne!(p.mean(&f, Some(0)).unwrap(), before);
}

fn demo(sim: &SimConfig, ex: &ExpertConfig) -> Demonstration {
    generate_demonstration(sim, ex, Horizon { burn_in: 5, continuation: 10 }, 11, Split::Train, 0, StyleClass::Passive)
        .unwrap()
}

#[test]
fn fabricated_collision_ends_training_rollout() {
    let sim = SimConfig::default();
    let ex = small_experts();
    let mc = ModelConfig::default();
    let mut d = demo(&sim, &ex);
    let ego = d.handoff_scene.vehicles[0];
    let mut blocker = VehicleState::new(ego.s + 1.0, ego.t, 0.0);
    blocker.style_class = Some(0);
    d.handoff_scene.vehicles[1] = blocker;
    let env = Env { sim: &sim, experts: &ex, models: &mc };
    let p = policy(2);
    let mode = RolloutMode { horizon: 50, train_mode: true, deterministic: false };
    let t = rollout(env, EgoDriver::Policy(&p), Some(0), &d, 0, mode, &mut stream(1, "r", &[])).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.termination, Some(Termination::Collision));

    let eval = RolloutMode { train_mode: false, ..mode };
    let t = rollout(env, EgoDriver::Policy(&p), Some(0), &d, 0, eval, &mut stream(1, "r", &[])).unwrap();
    assert_eq!(t.len(), 50);
    assert!(t.events[0].collision);
    assert_eq!(t.termination, None);
}

#[test]
fn rollouts_are_reproducible() {
    let sim = SimConfig::default();
    let ex = small_experts();
    let mc = ModelConfig::default();
    let d = demo(&sim, &ex);
    let env = Env { sim: &sim, experts: &ex, models: &mc };
    let p = policy(5);
    for deterministic in [true, false] {
        let mode = RolloutMode { horizon: 30, train_mode: false, deterministic };
        let a = rollout(env, EgoDriver::Policy(&p), Some(1), &d, 0, mode, &mut stream(9, "r", &[])).unwrap();
        let b = rollout(env, EgoDriver::Policy(&p), Some(1), &d, 0, mode, &mut stream(9, "r", &[])).unwrap();
        assert_eq!(a, b);
    }
    // A deterministic policy ignores the random stream.
    let mode = RolloutMode { horizon: 30, train_mode: false, deterministic: true };
    let a = rollout(env, EgoDriver::Policy(&p), Some(1), &d, 0, mode, &mut stream(1, "r", &[])).unwrap();
    let b = rollout(env, EgoDriver::Policy(&p), Some(1), &d, 0, mode, &mut stream(2, "r", &[])).unwrap();
    assert_eq!(a, b);
}

fn random_pairs(n: usize, shift: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, PAIR_DIM), |_| rng.random_range(-1.0..1.0) + shift)
}

#[test]
fn critic_symmetric_batch_is_a_fixed_point() {
    let mut rng = stream(1, "critic", &[]);
    let mut c = Critic::init(&NetConfig::default(), &mut rng).unwrap();
    let before = c.net.params().to_vec();
    let mut opt = RmsProp::new(RmsPropConfig::default(), before.len());
    let x = random_pairs(32, 0.0, &mut rng);
    let loss = critic_update(&mut c, &mut opt, x.view(), x.view(), 1.0).unwrap();
    assert!(loss.abs() < 1e-15);
    for (a, b) in c.net.params().iter().zip(&before) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn critic_learns_to_score_experts_higher() {
    let mut rng = stream(2, "critic", &[]);
    let mut c = Critic::init(&NetConfig::default(), &mut rng).unwrap();
    clip_weights(c.net.params_mut(), 0.01);
    let mut opt = RmsProp::new(RmsPropConfig { lr: 1e-3, ..RmsPropConfig::default() }, c.net.n_params());
    let expert = random_pairs(128, 1.0, &mut rng);
    let pol = random_pairs(128, -1.0, &mut rng);
    for _ in 0..100 {
        critic_update(&mut c, &mut opt, expert.view(), pol.view(), 0.01).unwrap();
        assert!(c.net.params().iter().all(|w| w.abs() <= 0.01));
    }
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let se = mean(c.scores(expert.view()).unwrap());
    let sp = mean(c.scores(pol.view()).unwrap());
    assert!(se > sp, "{se} vs {sp}");
}

fn set_output_bias(inf: &mut Inference, bias: [f64; CODE_DIM]) {
    let n = inf.net.n_params();
    inf.net.params_mut()[n - CODE_DIM..].copy_from_slice(&bias);
}

#[test]
fn perfect_classifier_has_zero_cross_entropy() {
    let mut inf = Inference::zeros(&NetConfig::default()).unwrap();
    set_output_bias(&mut inf, [0.0, 0.0, 1e3, 0.0]);
    let mut opt = Adam::new(AdamConfig::default(), inf.net.n_params());
    let mut rng = stream(3, "inf", &[]);
    let x = random_pairs(16, 0.0, &mut rng);
    let st = inference_update(&mut inf, &mut opt, x.view(), &[2; 16], &[x.view()], 0.0).unwrap();
    assert_eq!(st.ce, 0.0);
}

#[test]
fn zero_lambda_ignores_the_marginal() {
    let mut rng = stream(4, "inf", &[]);
    let base = Inference::init(&NetConfig::default(), &mut rng).unwrap();
    let x = random_pairs(16, 0.0, &mut rng);
    let codes: Vec<usize> = (0..16).map(|i| i % CODE_DIM).collect();
    let b1 = random_pairs(10, 0.5, &mut rng);
    let b2 = random_pairs(7, -2.0, &mut rng);
    let run = |burn: &[ArrayView2<f64>], lambda: f64| {
        let mut inf = base.clone();
        let mut opt = Adam::new(AdamConfig::default(), inf.net.n_params());
        inference_update(&mut inf, &mut opt, x.view(), &codes, burn, lambda).unwrap();
        inf.net.params().to_vec()
    };
    assert_eq!(run(&[b1.view()], 0.0), run(&[b2.view(), b1.view()], 0.0));
    assert_ne!(run(&[b1.view()], 0.0), run(&[b1.view()], 500.0));
}

/// Entropy of the burn-in marginal as a function of the output bias.
fn marginal_entropy(inf: &Inference, burn: ArrayView2<f64>) -> f64 {
    let post = inf.posteriors(burn).unwrap();
    let mut m = [0.0; CODE_DIM];
    for p in &post {
        for k in 0..CODE_DIM {
            m[k] += p[k] / post.len() as f64;
        }
    }
    entropy(&m)
}

#[test]
fn uniform_marginal_is_an_entropy_maximum() {
    let mut rng = stream(5, "inf", &[]);
    let inf = Inference::zeros(&NetConfig::default()).unwrap();
    let burn = random_pairs(20, 0.0, &mut rng);
    let h0 = marginal_entropy(&inf, burn.view());
    assert!((h0 - 4f64.ln()).abs() < 1e-12);
    // Central differences of H along each output logit vanish at the maximum.
    let eps = 1e-5;
    for k in 0..CODE_DIM {
        let mut bias = [0.0; CODE_DIM];
        let (mut up, mut down) = (inf.clone(), inf.clone());
        bias[k] = eps;
        set_output_bias(&mut up, bias);
        bias[k] = -eps;
        set_output_bias(&mut down, bias);
        let g = (marginal_entropy(&up, burn.view()) - marginal_entropy(&down, burn.view())) / (2.0 * eps);
        assert!(g.abs() < 1e-8, "{g}");
    }
    // The analytic entropy gradient is zero too, so lambda changes nothing.
    let x = random_pairs(8, 0.0, &mut rng);
    let run = |lambda: f64| {
        let mut i = inf.clone();
        let mut opt = Adam::new(AdamConfig::default(), i.net.n_params());
        let st = inference_update(&mut i, &mut opt, x.view(), &[1; 8], &[burn.view()], lambda).unwrap();
        assert!((st.entropy - 4f64.ln()).abs() < 1e-12);
        i.net.params().to_vec()
    };
    let (a, b) = (run(0.0), run(500.0));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn composite_reward_examples() {
    let r = composite_reward(0.0, Some(0.25f64.ln()), 1.0);
    assert!((r - (-0.693_147_180_559_945_3)).abs() < 1e-12);
    assert_eq!(composite_reward(0.7, Some(-3.0), 0.0), surrogate_reward(0.7));
    assert_eq!(composite_reward(0.7, None, 1.0), surrogate_reward(0.7));
    let mut prev = f64::NEG_INFINITY;
    for i in -50..50 {
        let r = composite_reward(f64::from(i) * 0.5, Some(-1.0), 1.0);
        assert!(r > prev);
        prev = r;
    }
}

use crate::models::surrogate_reward;
use crate::numerics::clip_weights;

struct Fixture {
    sim: SimConfig,
    ex: ExpertConfig,
    mc: ModelConfig,
    trpo: TrpoConfig,
    train: Vec<Demonstration>,
    val: Vec<Demonstration>,
}

fn fixture() -> Fixture {
    let sim = SimConfig::default();
    let ex = small_experts();
    let h = Horizon { burn_in: 10, continuation: 20 };
    Fixture {
        train: generate_split(&sim, &ex, h, 5, Split::Train, 8).unwrap(),
        val: generate_split(&sim, &ex, h, 5, Split::Val, 8).unwrap(),
        sim,
        ex,
        mc: ModelConfig::default(),
        trpo: TrpoConfig::default(),
    }
}

fn tiny(algorithm: Algorithm, iterations: usize) -> TrainConfig {
    TrainConfig {
        algorithm,
        horizon: 15,
        rollout_steps: 60,
        critic_batch: 32,
        inference_batch: 32,
        entropy_burn_ins: 4,
        iterations,
        checkpoint_every: 2,
        ..TrainConfig::default()
    }
}

fn metrics_bytes(dir: &Path) -> Vec<u8> {
    fs::read(dir.join("metrics.csv")).unwrap()
}

#[test]
fn training_logs_one_row_per_iteration_and_keeps_invariants() {
    let f = fixture();
    let env = Env { sim: &f.sim, experts: &f.ex, models: &f.mc };
    for algo in [Algorithm::Gail, Algorithm::Infogail, Algorithm::BurnInfogail] {
        let cfg = tiny(algo, 3);
        let tr = Trainer::new(env, &cfg, &f.trpo, 1, &f.train, &f.val).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let st = tr.run(dir.path(), false).unwrap();
        let rows = read_metrics(&dir.path().join("metrics.csv")).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(st.models.critic.net.params().iter().all(|w| w.abs() <= cfg.clip));
        assert!(dir.path().join("latest.ckpt").exists());
        for r in &rows {
            assert!(r.kl <= f.trpo.max_kl + 1e-12);
            if algo == Algorithm::Gail {
                assert!(r.ce.is_nan() && r.entropy.is_nan() && r.train_ami.is_nan());
            } else {
                assert!(r.entropy >= 0.0 && r.entropy <= 4f64.ln() + 1e-9);
                assert!((r.freq_z.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        if algo == Algorithm::Gail {
            let fresh = TrainState::init(&f.mc, &cfg, 1).unwrap();
            assert_eq!(st.models.inference, fresh.models.inference);
            assert!(!dir.path().join("best.ckpt").exists());
        } else {
            assert!(dir.path().join("best.ckpt").exists());
        }
    }
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let f = fixture();
    let env = Env { sim: &f.sim, experts: &f.ex, models: &f.mc };
    let full_cfg = tiny(Algorithm::BurnInfogail, 4);
    let full = tempfile::tempdir().unwrap();
    let a = Trainer::new(env, &full_cfg, &f.trpo, 2, &f.train, &f.val).unwrap().run(full.path(), false).unwrap();

    let part = tempfile::tempdir().unwrap();
    let half_cfg = TrainConfig { iterations: 2, ..full_cfg };
    Trainer::new(env, &half_cfg, &f.trpo, 2, &f.train, &f.val).unwrap().run(part.path(), false).unwrap();
    // A stale row past the checkpoint must be discarded on resume.
    let mut m = fs::OpenOptions::new().append(true).open(part.path().join("metrics.csv")).unwrap();
    writeln!(m, "{}", IterationMetrics { iter: 3, ..read_metrics(&part.path().join("metrics.csv")).unwrap()[0] }.csv_row()).unwrap();
    let b = Trainer::new(env, &full_cfg, &f.trpo, 2, &f.train, &f.val).unwrap().run(part.path(), true).unwrap();
    assert_eq!(a, b);
    assert_eq!(metrics_bytes(full.path()), metrics_bytes(part.path()));
    assert_eq!(fs::read(full.path().join("latest.ckpt")).unwrap(), fs::read(part.path().join("latest.ckpt")).unwrap());
}

#[test]
fn training_does_not_depend_on_worker_count() {
    let f = fixture();
    let env = Env { sim: &f.sim, experts: &f.ex, models: &f.mc };
    let cfg = tiny(Algorithm::Infogail, 2);
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let st = pool.install(|| Trainer::new(env, &cfg, &f.trpo, 3, &f.train, &f.val).unwrap().run(dir.path(), false).unwrap());
        (st, metrics_bytes(dir.path()))
    };
    assert_eq!(run(1), run(3));
}
