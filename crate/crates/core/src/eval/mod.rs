//! Clustering scores, playback error and event statistics.

mod ami;
mod export;
mod kmeans;
mod playback;
mod validation;

pub use ami::{ami, label_entropy, Ami, ContingencyTable};
pub use export::{forced_code_traces, write_ami, write_embedding, write_events, write_rmse, write_traces, AmiRow, TraceRow};
pub use kmeans::{kmeans, KMeans, Standardizer};
pub use playback::{event_frequencies, eval_rollouts, rmse_curves, sample_demos, CodeSource, EvalRollouts, EventFrequencies, RmseCurves};
pub use validation::{inferred_labels, kmeans_labels, validation_ami};
