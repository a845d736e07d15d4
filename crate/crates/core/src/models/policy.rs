use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ACTION_DIM, CODE_DIM, EMBED_DIM};
use crate::error::{Error, Result};
use crate::numerics::{Activation, Checkpoint, Layer, Mlp, MlpCache};
use crate::simulator::OBS_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub trunk_hidden: usize,
    pub head_hidden: usize,
    pub init_log_sigma: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            trunk_hidden: 64,
            head_hidden: 64,
            init_log_sigma: 0.5f64.ln(),
        }
    }
}

const MEAN_INIT_SCALE: f64 = 0.01;

/// Gaussian policy `N(mean(obs, z), diag(sigma^2))` over normalized actions.
///
/// The code enters through a linear embedding concatenated with the trunk
/// output before the head. A missing code contributes a zero embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub trunk: Mlp,
    /// Row `k` is the embedding of code `k`.
    pub embedding: Array2<f64>,
    pub head: Mlp,
    pub log_sigma: [f64; ACTION_DIM],
}

pub struct PolicyCache {
    trunk: MlpCache,
    head: MlpCache,
    codes: Vec<Option<usize>>,
}

impl PolicyCache {
    pub fn mean(&self) -> &Array2<f64> {
        self.head.output()
    }
}

fn layers(cfg: &PolicyConfig) -> (Vec<Layer>, Vec<Layer>) {
    (
        vec![Layer::new(OBS_DIM, cfg.trunk_hidden, Activation::Tanh)],
        vec![
            Layer::new(cfg.trunk_hidden + EMBED_DIM, cfg.head_hidden, Activation::Tanh),
            Layer::new(cfg.head_hidden, ACTION_DIM, Activation::Identity),
        ],
    )
}

impl Policy {
    pub fn init<R: Rng + ?Sized>(cfg: &PolicyConfig, rng: &mut R) -> Result<Self> {
        let (t, h) = layers(cfg);
        let trunk = Mlp::init(t, rng)?;
        let bound = (6.0 / (CODE_DIM + EMBED_DIM) as f64).sqrt();
        let embedding = Array2::from_shape_fn((CODE_DIM, EMBED_DIM), |_| rng.random_range(-bound..bound));
        let mut head = Mlp::init(h, rng)?;
        // near-zero initial mean: drive straight at constant speed
        let n = head.n_params();
        let last = n - ACTION_DIM * (cfg.head_hidden + 1);
        head.params_mut()[last..n].iter_mut().for_each(|w| *w *= MEAN_INIT_SCALE);
        Ok(Self {
            trunk,
            embedding,
            head,
            log_sigma: [cfg.init_log_sigma; ACTION_DIM],
        })
    }

    pub fn n_params(&self) -> usize {
        self.trunk.n_params() + CODE_DIM * EMBED_DIM + self.head.n_params() + ACTION_DIM
    }

    /// Offset of the log standard deviations in the flat parameter vector,
    /// which is ordered trunk, embedding, head, log sigma.
    pub fn log_sigma_offset(&self) -> usize {
        self.n_params() - ACTION_DIM
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(self.trunk.params());
        p.extend(self.embedding.iter());
        p.extend_from_slice(self.head.params());
        p.extend_from_slice(&self.log_sigma);
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::shape("Policy::set_flat_params", self.n_params(), p.len()));
        }
        let (t, rest) = p.split_at(self.trunk.n_params());
        let (e, rest) = rest.split_at(CODE_DIM * EMBED_DIM);
        let (h, ls) = rest.split_at(self.head.n_params());
        self.trunk.set_params(t)?;
        self.embedding.iter_mut().zip(e).for_each(|(d, s)| *d = *s);
        self.head.set_params(h)?;
        self.log_sigma.copy_from_slice(ls);
        Ok(())
    }

    pub fn embed_code(&self, code: usize) -> Result<Vec<f64>> {
        if code >= CODE_DIM {
            return Err(Error::invalid("code", format!("{code} outside 0..{CODE_DIM}")));
        }
        Ok(self.embedding.row(code).to_vec())
    }

    pub fn sigma(&self) -> [f64; ACTION_DIM] {
        self.log_sigma.map(f64::exp)
    }

    pub fn forward(&self, features: ArrayView2<f64>, codes: &[Option<usize>]) -> Result<PolicyCache> {
        if features.nrows() != codes.len() {
            return Err(Error::shape("Policy::forward codes", features.nrows(), codes.len()));
        }
        let mut emb = Array2::zeros((codes.len(), EMBED_DIM));
        for (i, c) in codes.iter().enumerate() {
            if let Some(k) = *c {
                if k >= CODE_DIM {
                    return Err(Error::invalid("code", format!("{k} outside 0..{CODE_DIM}")));
                }
                emb.row_mut(i).assign(&self.embedding.row(k));
            }
        }
        let trunk = self.trunk.forward(features)?;
        let joined = concatenate(Axis(1), &[trunk.output().view(), emb.view()]).expect("same rows");
        let head = self.head.forward(joined.view())?;
        Ok(PolicyCache {
            trunk,
            head,
            codes: codes.to_vec(),
        })
    }

    /// Gradient of `sum(dmean * mean)` with respect to the flat parameters;
    /// the log sigma entries are left zero.
    pub fn mean_vjp(&self, cache: &PolicyCache, dmean: ArrayView2<f64>) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n_params()];
        let nt = self.trunk.n_params();
        let ne = CODE_DIM * EMBED_DIM;
        let nh = self.head.n_params();
        let d_joined = self.head.backward_into(&cache.head, dmean, &mut g[nt + ne..nt + ne + nh])?;
        let hidden = self.trunk.output_dim();
        for (i, c) in cache.codes.iter().enumerate() {
            if let Some(k) = *c {
                let row = d_joined.slice(s![i, hidden..]);
                for (gj, d) in g[nt + k * EMBED_DIM..nt + (k + 1) * EMBED_DIM].iter_mut().zip(row) {
                    *gj += d;
                }
            }
        }
        self.trunk
            .backward_into(&cache.trunk, d_joined.slice(s![.., ..hidden]), &mut g[..nt])?;
        Ok(g)
    }

    /// Directional derivative of the mean along flat parameter direction `v`.
    pub fn mean_jvp(&self, cache: &PolicyCache, v: &[f64]) -> Result<Array2<f64>> {
        if v.len() != self.n_params() {
            return Err(Error::shape("Policy::mean_jvp", self.n_params(), v.len()));
        }
        let nt = self.trunk.n_params();
        let ne = CODE_DIM * EMBED_DIM;
        let nh = self.head.n_params();
        let dt = self.trunk.jvp(&cache.trunk, &v[..nt], None)?;
        let mut de = Array2::zeros((cache.codes.len(), EMBED_DIM));
        for (i, c) in cache.codes.iter().enumerate() {
            if let Some(k) = *c {
                for (j, d) in de.row_mut(i).iter_mut().enumerate() {
                    *d = v[nt + k * EMBED_DIM + j];
                }
            }
        }
        let dj = concatenate(Axis(1), &[dt.view(), de.view()]).expect("same rows");
        self.head.jvp(&cache.head, &v[nt + ne..nt + ne + nh], Some(dj.view()))
    }

    /// Action mean for one standardized observation.
    pub fn mean(&self, features: &[f64], code: Option<usize>) -> Result<[f64; ACTION_DIM]> {
        if features.len() != OBS_DIM {
            return Err(Error::shape("Policy::mean features", OBS_DIM, features.len()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy observation",
            });
        }
        let x = ArrayView2::from_shape((1, OBS_DIM), features).expect("row");
        let cache = self.forward(x, &[code])?;
        let m = cache.mean();
        Ok([m[[0, 0]], m[[0, 1]]])
    }

    /// Samples a normalized action, or returns the mean when `deterministic`.
    pub fn act<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        code: Option<usize>,
        rng: &mut R,
        deterministic: bool,
    ) -> Result<[f64; ACTION_DIM]> {
        let mut a = self.mean(features, code)?;
        if !deterministic {
            for (ai, ls) in a.iter_mut().zip(self.log_sigma) {
                let z: f64 = StandardNormal.sample(rng);
                *ai += ls.exp() * z;
            }
        }
        Ok(a)
    }

    pub fn save_into(&self, ckpt: &mut Checkpoint, prefix: &str) -> Result<()> {
        ckpt.push(format!("{prefix}.trunk"), &[self.trunk.n_params()], self.trunk.params())?;
        ckpt.push(
            format!("{prefix}.embedding"),
            &[CODE_DIM, EMBED_DIM],
            self.embedding.as_slice().expect("standard layout"),
        )?;
        ckpt.push(format!("{prefix}.head"), &[self.head.n_params()], self.head.params())?;
        ckpt.push(format!("{prefix}.log_sigma"), &[ACTION_DIM], &self.log_sigma)?;
        Ok(())
    }

    pub fn load_from(cfg: &PolicyConfig, ckpt: &Checkpoint, prefix: &str) -> Result<Self> {
        let (t, h) = layers(cfg);
        let mut trunk = Mlp::zeros(t)?;
        let mut head = Mlp::zeros(h)?;
        trunk.set_params(ckpt.expect(&format!("{prefix}.trunk"), &[trunk.n_params()])?)?;
        head.set_params(ckpt.expect(&format!("{prefix}.head"), &[head.n_params()])?)?;
        let e = ckpt.expect(&format!("{prefix}.embedding"), &[CODE_DIM, EMBED_DIM])?;
        let embedding = Array2::from_shape_vec((CODE_DIM, EMBED_DIM), e.to_vec()).expect("checked shape");
        let ls = ckpt.expect(&format!("{prefix}.log_sigma"), &[ACTION_DIM])?;
        Ok(Self {
            trunk,
            embedding,
            head,
            log_sigma: [ls[0], ls[1]],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn policy(seed: u64) -> Policy {
        Policy::init(&PolicyConfig::default(), &mut stream(seed, "t", &[])).unwrap()
    }

    fn obs(rng: &mut impl Rng, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, OBS_DIM), |_| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn embedding_is_linear_in_one_hot() {
        let p = policy(1);
        for k in 0..CODE_DIM {
            assert_eq!(p.embed_code(k).unwrap(), p.embedding.row(k).to_vec());
        }
        let one_hot_sum = ndarray::arr1(&[1.0, 0.0, 1.0, 0.0]);
        let via_matrix = one_hot_sum.dot(&p.embedding);
        let summed: Vec<f64> = p.embed_code(0).unwrap().iter().zip(p.embed_code(2).unwrap()).map(|(a, b)| a + b).collect();
        for (a, b) in via_matrix.iter().zip(&summed) {
            assert!((a - b).abs() < 1e-15);
        }
        for i in 0..CODE_DIM {
            for j in i + 1..CODE_DIM {
                assert_ne!(p.embed_code(i).unwrap(), p.embed_code(j).unwrap());
            }
        }
        assert!(p.embed_code(4).is_err());
    }

    #[test]
    fn deterministic_act_is_the_mean_and_codes_matter() {
        let p = policy(2);
        let mut rng = stream(3, "t", &[]);
        let x = obs(&mut rng, 1);
        let f = x.row(0).to_vec();
        let m = p.mean(&f, Some(1)).unwrap();
        assert_eq!(p.act(&f, Some(1), &mut rng, true).unwrap(), m);
        assert_ne!(p.mean(&f, Some(2)).unwrap(), m);
        assert_ne!(p.mean(&f, None).unwrap(), m);
        let mut bad = f.clone();
        bad[3] = f64::NAN;
        assert!(p.mean(&bad, None).is_err());
    }

    #[test]
    fn fresh_policy_mean_is_near_zero() {
        let p = policy(6);
        let mut rng = stream(7, "t", &[]);
        let x = obs(&mut rng, 50);
        for row in x.rows() {
            let m = p.mean(&row.to_vec(), Some(0)).unwrap();
            assert!(m.iter().all(|v| v.abs() < 0.05), "{m:?}");
        }
    }

    #[test]
    fn small_sigma_samples_collapse_to_mean() {
        let mut p = policy(4);
        p.log_sigma = [-40.0; 2];
        let mut rng = stream(5, "t", &[]);
        let f = obs(&mut rng, 1).row(0).to_vec();
        let m = p.mean(&f, Some(0)).unwrap();
        let a = p.act(&f, Some(0), &mut rng, false).unwrap();
        assert!((a[0] - m[0]).abs() < 1e-15 && (a[1] - m[1]).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_matches_network_mean() {
        let p = policy(6);
        let mut rng = stream(7, "t", &[]);
        let f = obs(&mut rng, 1).row(0).to_vec();
        let m = p.mean(&f, Some(3)).unwrap();
        let n = 10_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let a = p.act(&f, Some(3), &mut rng, false).unwrap();
            acc[0] += a[0];
            acc[1] += a[1];
        }
        for k in 0..2 {
            let emp = acc[k] / n as f64;
            assert!((emp - m[k]).abs() < 3.0 * p.sigma()[k] / 100.0);
        }
    }

    #[test]
    fn flat_parameters_round_trip() {
        let mut p = policy(8);
        let flat = p.flat_params();
        assert_eq!(flat.len(), p.n_params());
        let mut q = policy(9);
        q.set_flat_params(&flat).unwrap();
        assert_eq!(p, q);
        let mut ck = Checkpoint::default();
        p.save_into(&mut ck, "policy").unwrap();
        let r = Policy::load_from(&PolicyConfig::default(), &ck, "policy").unwrap();
        assert_eq!(p, r);
        p.log_sigma[0] = 0.1;
        assert_eq!(p.flat_params()[p.log_sigma_offset()], 0.1);
        assert!(Policy::load_from(&PolicyConfig { trunk_hidden: 32, ..Default::default() }, &ck, "policy").is_err());
    }

    #[test]
    fn mean_gradients_match_finite_differences() {
        let cfg = PolicyConfig {
            trunk_hidden: 6,
            head_hidden: 5,
            ..Default::default()
        };
        let p = Policy::init(&cfg, &mut stream(10, "t", &[])).unwrap();
        let mut rng = stream(11, "t", &[]);
        let x = obs(&mut rng, 5);
        let codes = [Some(0), Some(3), None, Some(3), Some(1)];
        let w = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        let cache = p.forward(x.view(), &codes).unwrap();
        let g = p.mean_vjp(&cache, w.view()).unwrap();
        let base = p.flat_params();
        let f = |q: &[f64]| {
            let mut pp = p.clone();
            pp.set_flat_params(q).unwrap();
            (pp.forward(x.view(), &codes).unwrap().mean() * &w).sum()
        };
        let h = 1e-6;
        for k in 0..base.len() {
            let mut a = base.clone();
            a[k] += h;
            let mut b = base.clone();
            b[k] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "param {k}: {fd} vs {}", g[k]);
        }
        // the jvp is the adjoint of the vjp
        let v: Vec<f64> = (0..base.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jv = p.mean_jvp(&cache, &v).unwrap();
        let lhs = (&jv * &w).sum();
        let rhs: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
