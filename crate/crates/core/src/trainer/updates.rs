use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::models::{surrogate_reward, Critic, Inference, CODE_DIM};
use crate::numerics::{clip_weights, entropy, softmax, softmax_vjp, Adam, RmsProp, PROB_EPS};

/// One RMSProp step on the critic followed by weight clipping. Returns the
/// minimized loss `mean D(policy) - mean D(expert)`, so expert pairs are
/// pushed towards high scores.
pub fn critic_update(
    critic: &mut Critic,
    opt: &mut RmsProp,
    expert: ArrayView2<f64>,
    policy: ArrayView2<f64>,
    clip: f64,
) -> Result<f64> {
    let (ne, np) = (expert.nrows(), policy.nrows());
    if ne == 0 || np == 0 {
        return Err(Error::Empty("critic_update"));
    }
    let x = concatenate(Axis(0), &[expert, policy]).map_err(|e| Error::shape("critic_update", "PAIR_DIM", e.to_string()))?;
    let cache = critic.net.forward(x.view())?;
    let out = cache.output();
    let mean_e = out.slice(ndarray::s![..ne, 0]).sum() / ne as f64;
    let mean_p = out.slice(ndarray::s![ne.., 0]).sum() / np as f64;
    let loss = mean_p - mean_e;
    if !loss.is_finite() {
        return Err(Error::NonFinite { context: "critic loss" });
    }
    let mut dout = Array2::zeros((ne + np, 1));
    dout.slice_mut(ndarray::s![..ne, 0]).fill(-1.0 / ne as f64);
    dout.slice_mut(ndarray::s![ne.., 0]).fill(1.0 / np as f64);
    let (_, grads) = critic.net.backward(&cache, dout.view())?;
    opt.step(critic.net.params_mut(), &grads)?;
    clip_weights(critic.net.params_mut(), clip);
    Ok(loss)
}

/// Losses seen by one inference step, evaluated before the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceStats {
    pub ce: f64,
    /// Entropy of the mean burn-in posterior.
    pub entropy: f64,
    pub marginal: [f64; CODE_DIM],
}

/// One Adam step on `C - lambda * H`, where `C` is the cross-entropy summed
/// over the minibatch (the reported `ce` is its per-pair mean). `pairs` are
/// policy pairs labelled with the codes they were generated under;
/// `burn_ins` is the Monte-Carlo batch of expert burn-ins whose averaged
/// posteriors define the code marginal `H` is taken of.
pub fn inference_update(
    inference: &mut Inference,
    opt: &mut Adam,
    pairs: ArrayView2<f64>,
    codes: &[usize],
    burn_ins: &[ArrayView2<f64>],
    lambda: f64,
) -> Result<InferenceStats> {
    let b = pairs.nrows();
    if b == 0 || burn_ins.is_empty() {
        return Err(Error::Empty("inference_update"));
    }
    if codes.len() != b {
        return Err(Error::shape("inference_update codes", b, codes.len()));
    }
    let mut grads = vec![0.0; inference.net.n_params()];

    let cache = inference.net.forward(pairs)?;
    let mut dlogits = Array2::zeros((b, CODE_DIM));
    let mut ce = 0.0;
    for (i, (row, &z)) in cache.output().rows().into_iter().zip(codes).enumerate() {
        if z >= CODE_DIM {
            return Err(Error::invalid("code", format!("{z} outside 0..{CODE_DIM}")));
        }
        let p = softmax(&row.to_vec());
        ce -= p[z].max(PROB_EPS).ln();
        for k in 0..CODE_DIM {
            dlogits[[i, k]] = p[k] - f64::from(u8::from(k == z));
        }
    }
    ce /= b as f64;
    inference.net.backward_into(&cache, dlogits.view(), &mut grads)?;

    // The marginal averages per-trajectory means, so each row carries 1/(M T_m).
    let stacked = concatenate(Axis(0), burn_ins).map_err(|e| Error::shape("inference_update burn-ins", "PAIR_DIM", e.to_string()))?;
    let m = burn_ins.len() as f64;
    let weights: Vec<f64> = burn_ins
        .iter()
        .flat_map(|t| std::iter::repeat_n(1.0 / (m * t.nrows() as f64), t.nrows()))
        .collect();
    let bcache = inference.net.forward(stacked.view())?;
    let probs: Vec<Vec<f64>> = bcache.output().rows().into_iter().map(|r| softmax(&r.to_vec())).collect();
    let mut marginal = [0.0; CODE_DIM];
    for (p, w) in probs.iter().zip(&weights) {
        for k in 0..CODE_DIM {
            marginal[k] += w * p[k];
        }
    }
    let h = entropy(&marginal);
    if lambda > 0.0 {
        let dh: Vec<f64> = marginal.iter().map(|p| -(p.max(PROB_EPS).ln() + 1.0)).collect();
        let mut d = Array2::zeros((probs.len(), CODE_DIM));
        for (i, (p, w)) in probs.iter().zip(&weights).enumerate() {
            for (k, g) in softmax_vjp(p, &dh).into_iter().enumerate() {
                d[[i, k]] = -lambda * w * g;
            }
        }
        inference.net.backward_into(&bcache, d.view(), &mut grads)?;
    }
    if !(ce.is_finite() && h.is_finite()) {
        return Err(Error::NonFinite { context: "inference loss" });
    }
    opt.step(inference.net.params_mut(), &grads)?;
    Ok(InferenceStats {
        ce,
        entropy: h,
        marginal,
    })
}

/// Per-step reward: softplus critic score plus `eta * log q(z | s, a)`.
/// `log_q` is `None` for plain GAIL.
pub fn composite_reward(score: f64, log_q: Option<f64>, eta: f64) -> f64 {
    surrogate_reward(score) + log_q.map_or(0.0, |l| eta * l)
}

/// `log q(z | s, a)` with the probability floored at [`PROB_EPS`].
pub fn style_log_prob(posterior: &[f64; CODE_DIM], code: usize) -> f64 {
    posterior[code].max(PROB_EPS).ln()
}
