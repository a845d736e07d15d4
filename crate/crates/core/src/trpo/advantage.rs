use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    LinearFeature,
    None,
}

/// Discounted returns within trajectories; `dones[i]` marks the last step
/// of a trajectory.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64) -> Result<Vec<f64>> {
    if rewards.len() != dones.len() {
        return Err(Error::shape("discounted_returns", rewards.len(), dones.len()));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        if dones[i] {
            acc = 0.0;
        }
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    Ok(out)
}

const RIDGE: f64 = 1e-5;

/// Baseline features `(o, o^2, t, t^2, t^3, 1)` with `o` clipped to
/// `[-10, 10]` and `t` the step index divided by 100.
fn feature_row(obs: &[f64], step: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(obs.iter().map(|o| o.clamp(-10.0, 10.0)));
    out.extend(obs.iter().map(|o| o.clamp(-10.0, 10.0).powi(2)));
    let t = step as f64 / 100.0;
    out.extend_from_slice(&[t, t * t, t * t * t, 1.0]);
}

/// Least-squares fit of the returns on the baseline features, evaluated on
/// the same rows.
pub fn fit_linear_baseline(obs: ArrayView2<f64>, steps: &[usize], returns: &[f64]) -> Result<Vec<f64>> {
    let n = obs.nrows();
    if steps.len() != n || returns.len() != n {
        return Err(Error::shape("fit_linear_baseline", n, steps.len().min(returns.len())));
    }
    let d = 2 * obs.ncols() + 4;
    let mut x = DMatrix::<f64>::zeros(n, d);
    let mut row = Vec::with_capacity(d);
    for i in 0..n {
        feature_row(obs.row(i).as_slice().expect("contiguous rows"), steps[i], &mut row);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    let y = DVector::from_column_slice(returns);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let mut reg = RIDGE;
    for _ in 0..5 {
        let a = &xtx + DMatrix::<f64>::identity(d, d) * reg;
        if let Some(ch) = a.cholesky() {
            let w = ch.solve(&xty);
            if w.iter().all(|v| v.is_finite()) {
                return Ok((&x * w).iter().copied().collect());
            }
        }
        reg *= 10.0;
    }
    Err(Error::NonFinite {
        context: "linear baseline fit",
    })
}

/// Returns and normalized advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

pub fn compute_advantages(
    rewards: &[f64],
    dones: &[bool],
    obs: ArrayView2<f64>,
    steps: &[usize],
    gamma: f64,
    baseline: Baseline,
) -> Result<Advantages> {
    let returns = discounted_returns(rewards, dones, gamma)?;
    let mut adv = match baseline {
        Baseline::None => returns.clone(),
        Baseline::LinearFeature => {
            let b = fit_linear_baseline(obs, steps, &returns)?;
            returns.iter().zip(b).map(|(g, b)| g - b).collect()
        }
    };
    normalize(&mut adv);
    if adv.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite { context: "advantages" });
    }
    Ok(Advantages {
        returns,
        advantages: adv,
    })
}

/// Centers the values and scales them to unit standard deviation when it
/// exceeds `1e-8`.
pub fn normalize(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    for a in v.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn return_examples() {
        let r = [0.5, -1.0, 2.0];
        assert_eq!(discounted_returns(&r, &[false, false, true], 0.0).unwrap(), r.to_vec());
        assert_eq!(discounted_returns(&[1.0, 2.0], &[false, true], 1.0).unwrap(), vec![3.0, 2.0]);
        // boundaries stop accumulation
        assert_eq!(
            discounted_returns(&[1.0, 1.0, 1.0], &[true, false, true], 1.0).unwrap(),
            vec![1.0, 2.0, 1.0]
        );
    }

    #[test]
    fn constant_reward_approaches_geometric_limit() {
        let n = 5000;
        let mut dones = vec![false; n];
        dones[n - 1] = true;
        let g = discounted_returns(&vec![1.0; n], &dones, 0.99).unwrap();
        // closed form of the truncated series
        let expected = (1.0 - 0.99f64.powi(n as i32)) / 0.01;
        assert!((g[0] - expected).abs() < 1e-9);
        assert!((g[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_recovers_a_linear_target_and_normalization_holds() {
        let mut rng = stream(1, "t", &[]);
        let n = 300;
        let obs: Array2<f64> = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let steps: Vec<usize> = (0..n).map(|i| i % 50).collect();
        let target: Vec<f64> = (0..n)
            .map(|i| 2.0 * obs[[i, 0]] - obs[[i, 2]].powi(2) + 0.5 * steps[i] as f64 / 100.0 + 1.0)
            .collect();
        let fit = fit_linear_baseline(obs.view(), &steps, &target).unwrap();
        for (a, b) in fit.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3);
        }
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let dones: Vec<bool> = (0..n).map(|i| i % 50 == 49).collect();
        let a = compute_advantages(&rewards, &dones, obs.view(), &steps, 0.9, Baseline::LinearFeature).unwrap();
        let mean = a.advantages.iter().sum::<f64>() / n as f64;
        let var = a.advantages.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_values_are_only_centered() {
        let mut v = vec![3.0; 4];
        normalize(&mut v);
        assert_eq!(v, vec![0.0; 4]);
    }
}
