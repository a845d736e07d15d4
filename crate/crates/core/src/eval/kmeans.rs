use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Array2<f64>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(c: &Array2<f64>, p: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, row) in c.rows().into_iter().enumerate() {
        let d = sq_dist(row, p);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: ArrayView2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let mut c = Array2::zeros((k, points.ncols()));
    c.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = points.rows().into_iter().map(|p| sq_dist(p, c.row(0))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        c.row_mut(j).assign(&points.row(idx));
        for (i, p) in points.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c.row(j)));
        }
    }
    c
}

fn lloyd(points: ArrayView2<f64>, mut c: Array2<f64>, max_iter: usize) -> KMeans {
    let n = points.nrows();
    let k = c.nrows();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.rows().into_iter().enumerate() {
            let (l, _) = nearest(&c, p);
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(c.dim());
        let mut counts = vec![0usize; k];
        for (i, p) in points.rows().into_iter().enumerate() {
            sums.row_mut(labels[i]).scaled_add(1.0, &p);
            counts[labels[i]] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                c.row_mut(j).assign(&(&sums.row(j) / counts[j] as f64));
            } else {
                // empty cluster: move it to the worst-fitted point
                let far = (0..n)
                    .map(|i| (i, sq_dist(points.row(i), c.row(labels[i]))))
                    .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
                    .0;
                c.row_mut(j).assign(&points.row(far));
                labels[far] = j;
            }
        }
    }
    let inertia = points
        .rows()
        .into_iter()
        .map(|p| nearest(&c, p))
        .map(|(_, d)| d)
        .sum();
    let labels = points.rows().into_iter().map(|p| nearest(&c, p).0).collect();
    KMeans {
        centroids: c,
        labels,
        inertia,
    }
}

/// Lloyd's algorithm from k-means++ starts; the restart with the lowest
/// inertia wins. Each restart draws from its own seeded stream.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeans> {
    if points.nrows() == 0 {
        return Err(Error::Empty("kmeans"));
    }
    if k == 0 || restarts == 0 {
        return Err(Error::invalid("k", "k and restarts must be >= 1"));
    }
    let mut best: Option<KMeans> = None;
    for r in 0..restarts {
        let mut rng = stream(seed, "kmeans", &[r as u64]);
        let init = plus_plus_init(points, k, &mut rng);
        let fit = lloyd(points, init, 300);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

impl KMeans {
    pub fn predict(&self, points: ArrayView2<f64>) -> Vec<usize> {
        points.rows().into_iter().map(|p| nearest(&self.centroids, p).0).collect()
    }
}

/// Per-feature standardization fitted on one set and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(points: ArrayView2<f64>) -> Result<Self> {
        let mean = points.mean_axis(Axis(0)).ok_or(Error::Empty("standardizer"))?;
        let std = points.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Ok(Self { mean, std })
    }

    pub fn apply(&self, points: ArrayView2<f64>) -> Array2<f64> {
        (&points - &self.mean) / &self.std
    }
}
