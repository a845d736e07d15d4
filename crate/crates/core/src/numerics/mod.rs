//! Dense tanh networks with hand-written gradients, first-order optimizers
//! and distribution helpers.

mod checkpoint;
mod dist;
mod mlp;
mod optim;

pub use checkpoint::{Checkpoint, NamedArray};
pub use dist::{
    cross_entropy, cross_entropy_logit_grad, entropy, entropy_grad, gaussian_logprob, gaussian_logprob_value,
    softmax, softmax_vjp, CrossEntropy, GaussianLogProb, PROB_EPS,
};
pub use mlp::{Activation, Layer, Mlp, MlpCache};
pub use optim::{clip_weights, Adam, AdamConfig, RmsProp, RmsPropConfig};
