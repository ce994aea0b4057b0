use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    /// Objective after every Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn sq_dist(y: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    (0..y.ncols()).map(|d| (y[(i, d)] - c[(j, d)]).powi(2)).sum()
}

pub fn wcss(y: &DMatrix<f64>, assignments: &[usize], centroids: &DMatrix<f64>) -> f64 {
    assignments.iter().enumerate().map(|(i, &a)| sq_dist(y, i, centroids, a)).sum()
}

fn seed_plus_plus(y: &DMatrix<f64>, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = y.nrows();
    let mut centroids = DMatrix::zeros(c, y.ncols());
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.set_row(0, &y.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(y, i, &centroids, 0)).collect();
    for j in 1..c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        } else {
            // every point coincides with a centre: take an unused one
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.set_row(j, &y.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(y, i, &centroids, j));
        }
    }
    centroids
}

fn nearest(y: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for j in 0..centroids.nrows() {
        let d = sq_dist(y, i, centroids, j);
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

fn update_centroids(y: &DMatrix<f64>, assignments: &[usize], c: usize) -> DMatrix<f64> {
    let mut sums = DMatrix::zeros(c, y.ncols());
    let mut counts = vec![0usize; c];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for d in 0..y.ncols() {
            sums[(a, d)] += y[(i, d)];
        }
    }
    for (j, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            sums.row_mut(j).iter_mut().for_each(|x| *x /= cnt as f64);
        }
    }
    sums
}

/// Moves the point farthest from its centre into each empty cluster.
fn fill_empty(y: &DMatrix<f64>, assignments: &mut [usize], centroids: &DMatrix<f64>, c: usize) {
    loop {
        let mut counts = vec![0usize; c];
        assignments.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&k| k == 0) else {
            return;
        };
        let far = (0..y.nrows())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(y, a, centroids, assignments[a])
                    .total_cmp(&sq_dist(y, b, centroids, assignments[b]))
                    .then(b.cmp(&a))
            })
            .expect("c <= n leaves a cluster with two points");
        assignments[far] = empty;
    }
}

/// One Lloyd run from the given centres.
pub fn lloyd(y: &DMatrix<f64>, mut centroids: DMatrix<f64>) -> KMeans {
    let c = centroids.nrows();
    let n = y.nrows();
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_ITER {
        let mut next: Vec<usize> = (0..n).map(|i| nearest(y, i, &centroids)).collect();
        fill_empty(y, &mut next, &centroids, c);
        let changed = next != assignments;
        assignments = next;
        centroids = update_centroids(y, &assignments, c);
        trace.push(wcss(y, &assignments, &centroids));
        if !changed {
            break;
        }
    }
    let wcss = *trace.last().expect("at least one iteration");
    KMeans {
        assignments,
        centroids,
        wcss,
        trace,
    }
}

/// Best of `restarts` k-means++ seeded Lloyd runs by lowest WCSS.
pub fn kmeans(y: &DMatrix<f64>, c: usize, restarts: usize, seed: u64) -> Result<KMeans> {
    let n = y.nrows();
    if n == 0 {
        return Err(Error::Empty("embedding"));
    }
    if c == 0 || c > n {
        return Err(Error::InvalidInput(format!("cluster count {c} must lie in 1..={n}")));
    }
    if restarts == 0 {
        return Err(Error::InvalidInput("restarts must be positive".into()));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("embedding contains non-finite values".into()));
    }
    let runs: Vec<KMeans> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(y, seed_plus_plus(y, c, &mut rng))
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.wcss.total_cmp(&b.1.wcss).then(a.0.cmp(&b.0)))
        .expect("restarts > 0")
        .1;
    Ok(best)
}
