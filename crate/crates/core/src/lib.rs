//! Burn-in conditioned adversarial imitation learning for multi-style
//! traffic: an oval-track simulator with IDM/MOBIL experts, GAIL, InfoGAIL
//! and Burn-InfoGAIL trainers, and the clustering and playback evaluation
//! harness.

pub mod error;
pub mod eval;
pub mod experts;
pub mod models;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod simulator;
pub mod trainer;
pub mod trpo;

pub use error::{Error, Result};
