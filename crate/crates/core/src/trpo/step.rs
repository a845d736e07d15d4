use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::advantage::Baseline;
use super::cg::conjugate_gradient;
use crate::error::{Error, Result};

/// A policy `N(mean(x; θ), diag(exp(2 log σ)))` whose log σ entries are a
/// contiguous block of the flat parameter vector.
pub trait DiagGaussianPolicy {
    type Input;
    type Cache;

    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, p: &[f64]) -> Result<()>;
    fn log_sigma_offset(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn forward(&self, input: &Self::Input) -> Result<Self::Cache>;
    fn mean<'a>(&self, cache: &'a Self::Cache) -> ArrayView2<'a, f64>;
    /// Gradient of `sum(dmean * mean)` with respect to the parameters.
    fn mean_vjp(&self, cache: &Self::Cache, dmean: ArrayView2<f64>) -> Result<Vec<f64>>;
    fn mean_jvp(&self, cache: &Self::Cache, v: &[f64]) -> Result<Array2<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrpoConfig {
    pub max_kl: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    pub baseline: Baseline,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            max_kl: 0.01,
            cg_iters: 10,
            cg_tol: 1e-10,
            cg_damping: 0.1,
            backtrack_ratio: 0.8,
            max_backtracks: 10,
            baseline: Baseline::LinearFeature,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_kl > 0.0) {
            return Err(Error::invalid("max_kl", "must be > 0"));
        }
        if !(self.cg_damping >= 0.0) {
            return Err(Error::invalid("cg_damping", "must be >= 0"));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(Error::invalid("backtrack_ratio", "must lie in (0, 1)"));
        }
        if self.cg_iters == 0 {
            return Err(Error::invalid("cg_iters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Frozen behaviour-policy statistics plus actions and advantages.
#[derive(Debug, Clone)]
pub struct AdvantageBatch {
    pub actions: Array2<f64>,
    pub advantages: Vec<f64>,
    pub old_mean: Array2<f64>,
    pub old_log_sigma: Vec<f64>,
    pub old_logp: Vec<f64>,
}

impl AdvantageBatch {
    /// Records the current policy's statistics for `actions`.
    pub fn new<P: DiagGaussianPolicy>(
        policy: &P,
        input: &P::Input,
        actions: Array2<f64>,
        advantages: Vec<f64>,
    ) -> Result<Self> {
        let cache = policy.forward(input)?;
        let old_mean = policy.mean(&cache).to_owned();
        if old_mean.dim() != actions.dim() || advantages.len() != actions.nrows() {
            return Err(Error::shape(
                "AdvantageBatch",
                format!("{:?}", old_mean.dim()),
                format!("{:?}/{}", actions.dim(), advantages.len()),
            ));
        }
        let p = policy.flat_params();
        let off = policy.log_sigma_offset();
        let old_log_sigma = p[off..off + policy.action_dim()].to_vec();
        let old_logp = logps(&actions, old_mean.view(), &old_log_sigma);
        Ok(Self {
            actions,
            advantages,
            old_mean,
            old_log_sigma,
            old_logp,
        })
    }

    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }
}

fn logps(actions: &Array2<f64>, mean: ArrayView2<f64>, log_sigma: &[f64]) -> Vec<f64> {
    actions
        .rows()
        .into_iter()
        .zip(mean.rows())
        .map(|(a, m)| {
            crate::numerics::gaussian_logprob_value(
                a.as_slice().expect("row"),
                m.to_vec().as_slice(),
                log_sigma,
            )
        })
        .collect()
}

/// Mean KL(old || new) over the batch.
pub fn mean_kl(batch: &AdvantageBatch, new_mean: ArrayView2<f64>, new_log_sigma: &[f64]) -> f64 {
    let n = batch.len() as f64;
    let mut kl = 0.0;
    for (mo, mn) in batch.old_mean.rows().into_iter().zip(new_mean.rows()) {
        for k in 0..new_log_sigma.len() {
            let (lo, ln) = (batch.old_log_sigma[k], new_log_sigma[k]);
            kl += ln - lo + ((2.0 * lo).exp() + (mo[k] - mn[k]).powi(2)) / (2.0 * (2.0 * ln).exp()) - 0.5;
        }
    }
    kl / n
}

/// Importance-weighted surrogate `mean(exp(logp - logp_old) * A)`.
pub fn surrogate(batch: &AdvantageBatch, new_mean: ArrayView2<f64>, new_log_sigma: &[f64]) -> f64 {
    let lp = logps(&batch.actions, new_mean, new_log_sigma);
    lp.iter()
        .zip(&batch.old_logp)
        .zip(&batch.advantages)
        .map(|((l, o), a)| (l - o).exp() * a)
        .sum::<f64>()
        / batch.len() as f64
}

/// Gradient of the surrogate at the behaviour policy.
pub fn surrogate_gradient<P: DiagGaussianPolicy>(policy: &P, cache: &P::Cache, batch: &AdvantageBatch) -> Result<Vec<f64>> {
    let n = batch.len() as f64;
    let mean = policy.mean(cache);
    let d = policy.action_dim();
    let off = policy.log_sigma_offset();
    let p = policy.flat_params();
    let ls = &p[off..off + d];
    let inv_var: Vec<f64> = ls.iter().map(|l| (-2.0 * l).exp()).collect();
    let mut dmean = Array2::zeros(mean.dim());
    let mut dls = vec![0.0; d];
    for i in 0..batch.len() {
        let a = batch.advantages[i] / n;
        for k in 0..d {
            let diff = batch.actions[[i, k]] - mean[[i, k]];
            dmean[[i, k]] = a * diff * inv_var[k];
            dls[k] += a * (diff * diff * inv_var[k] - 1.0);
        }
    }
    let mut g = policy.mean_vjp(cache, dmean.view())?;
    for k in 0..d {
        g[off + k] += dls[k];
    }
    Ok(g)
}

/// `F v + damping v`, with `F` the Hessian of the mean KL at the current
/// parameters: `J^T diag(1/σ²) J / N` for the mean and `2` per log σ entry.
pub fn fisher_vector_product<P: DiagGaussianPolicy>(
    policy: &P,
    cache: &P::Cache,
    v: &[f64],
    damping: f64,
) -> Result<Vec<f64>> {
    let d = policy.action_dim();
    let off = policy.log_sigma_offset();
    let p = policy.flat_params();
    let mut jv = policy.mean_jvp(cache, v)?;
    let n = jv.nrows() as f64;
    for k in 0..d {
        let w = (-2.0 * p[off + k]).exp() / n;
        jv.column_mut(k).mapv_inplace(|x| x * w);
    }
    let mut out = policy.mean_vjp(cache, jv.view())?;
    for k in 0..d {
        out[off + k] += 2.0 * v[off + k];
    }
    for (o, vi) in out.iter_mut().zip(v) {
        *o += damping * vi;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrpoDiagnostics {
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub cg_residual: f64,
    pub backtrack_steps: usize,
    pub accepted: bool,
}

/// One KL-constrained policy update. The policy is left unchanged when no
/// backtracking step satisfies both the KL bound and non-negative surrogate
/// improvement.
pub fn trpo_step<P: DiagGaussianPolicy>(
    policy: &mut P,
    input: &P::Input,
    batch: &AdvantageBatch,
    cfg: &TrpoConfig,
) -> Result<TrpoDiagnostics> {
    let old = policy.flat_params();
    let cache = policy.forward(input)?;
    let off = policy.log_sigma_offset();
    let d = policy.action_dim();
    let before = surrogate(batch, policy.mean(&cache), &old[off..off + d]);
    let mut diag = TrpoDiagnostics {
        surrogate_before: before,
        surrogate_after: before,
        ..Default::default()
    };
    let g = surrogate_gradient(policy, &cache, batch)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "policy gradient",
        });
    }
    if g.iter().all(|x| *x == 0.0) {
        return Ok(diag);
    }
    let sol = conjugate_gradient(
        |v| fisher_vector_product(policy, &cache, v, cfg.cg_damping),
        &g,
        cfg.cg_iters,
        cfg.cg_tol,
    )?;
    diag.cg_residual = sol.residual;
    let fx = fisher_vector_product(policy, &cache, &sol.x, cfg.cg_damping)?;
    let shs: f64 = sol.x.iter().zip(&fx).map(|(a, b)| a * b).sum();
    if !(shs > 0.0 && shs.is_finite()) {
        return Ok(diag);
    }
    let scale = (2.0 * cfg.max_kl / shs).sqrt();
    let mut trial = vec![0.0; old.len()];
    for k in 0..cfg.max_backtracks {
        let frac = scale * cfg.backtrack_ratio.powi(k as i32);
        for i in 0..old.len() {
            trial[i] = old[i] + frac * sol.x[i];
        }
        policy.set_flat_params(&trial)?;
        let c = policy.forward(input)?;
        let ls = &trial[off..off + d];
        let kl = mean_kl(batch, policy.mean(&c), ls);
        let after = surrogate(batch, policy.mean(&c), ls);
        if kl.is_finite() && after.is_finite() && kl <= cfg.max_kl && after >= before {
            diag.kl = kl;
            diag.surrogate_after = after;
            diag.backtrack_steps = k;
            diag.accepted = true;
            return Ok(diag);
        }
    }
    policy.set_flat_params(&old)?;
    diag.backtrack_steps = cfg.max_backtracks;
    Ok(diag)
}
