use ndarray::Array2;

use super::ami::{ami, Ami};
use super::kmeans::{kmeans, Standardizer};
use crate::error::Result;
use crate::experts::Demonstration;
use crate::models::{argmax, Inference, CODE_DIM};
use crate::trainer::ExpertPairs;

/// AMI of per-demonstration predicted labels against the hidden styles.
pub fn validation_ami(predicted: &[usize], demos: &[Demonstration]) -> Result<Ami> {
    let truth: Vec<usize> = demos.iter().map(|d| d.style_class.index()).collect();
    ami(&truth, predicted)
}

/// Majority-vote code of every demonstration's burn-in.
pub fn inferred_labels(inference: &Inference, pairs: &ExpertPairs) -> Result<Vec<usize>> {
    Ok(pairs.infer(inference)?.into_iter().map(|t| t.vote).collect())
}

/// K-means baseline: clusters standardized training pairs into four groups
/// and labels each validation demonstration by the majority cluster of its
/// pairs (ties to the lower cluster).
pub fn kmeans_labels(train: &ExpertPairs, val: &ExpertPairs, seed: u64, restarts: usize) -> Result<Vec<usize>> {
    let scaler = Standardizer::fit(train.rows.view())?;
    let model = kmeans(scaler.apply(train.rows.view()).view(), CODE_DIM, seed, restarts)?;
    Ok((0..val.n_demos())
        .map(|i| {
            let x: Array2<f64> = scaler.apply(val.demo(i));
            let mut counts = [0.0; CODE_DIM];
            for l in model.predict(x.view()) {
                counts[l] += 1.0;
            }
            argmax(&counts)
        })
        .collect())
}
