//! Trust-region policy optimization for diagonal Gaussian policies.

mod advantage;
mod cg;
mod step;

use ndarray::{Array2, ArrayView2};

pub use advantage::{compute_advantages, discounted_returns, fit_linear_baseline, normalize, Advantages, Baseline};
pub use cg::{conjugate_gradient, CgSolution};
pub use step::{
    fisher_vector_product, mean_kl, surrogate, surrogate_gradient, trpo_step, AdvantageBatch, DiagGaussianPolicy,
    TrpoConfig, TrpoDiagnostics,
};

use crate::error::Result;
use crate::models::{Policy, PolicyCache, ACTION_DIM};

/// Batch input of the driving policy: standardized observations and codes.
#[derive(Debug, Clone)]
pub struct PolicyInput {
    pub features: Array2<f64>,
    pub codes: Vec<Option<usize>>,
}

impl DiagGaussianPolicy for Policy {
    type Input = PolicyInput;
    type Cache = PolicyCache;

    fn flat_params(&self) -> Vec<f64> {
        Policy::flat_params(self)
    }

    fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        Policy::set_flat_params(self, p)
    }

    fn log_sigma_offset(&self) -> usize {
        Policy::log_sigma_offset(self)
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn forward(&self, input: &PolicyInput) -> Result<PolicyCache> {
        Policy::forward(self, input.features.view(), &input.codes)
    }

    fn mean<'a>(&self, cache: &'a PolicyCache) -> ArrayView2<'a, f64> {
        cache.mean().view()
    }

    fn mean_vjp(&self, cache: &PolicyCache, dmean: ArrayView2<f64>) -> Result<Vec<f64>> {
        Policy::mean_vjp(self, cache, dmean)
    }

    fn mean_jvp(&self, cache: &PolicyCache, v: &[f64]) -> Result<Array2<f64>> {
        Policy::mean_jvp(self, cache, v)
    }
}
