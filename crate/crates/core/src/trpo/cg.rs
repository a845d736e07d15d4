use crate::error::{Error, Result};

/// Conjugate-gradient solution of `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    /// Final residual norm `|b - A x|`.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stops when `|r| <= tol * |b|` or after `iters` iterations.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], iters: usize, tol: f64) -> Result<CgSolution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    let target = tol * rr.sqrt();
    let mut it = 0;
    while it < iters && rr.sqrt() > target {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            if pap.is_finite() {
                break;
            }
            return Err(Error::NonFinite {
                context: "conjugate gradient",
            });
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::NonFinite {
                context: "conjugate gradient",
            });
        }
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    Ok(CgSolution {
        x,
        residual: rr.sqrt(),
        iterations: it,
    })
}
