//! Seeded, deterministic K-means.
//!
//! Lloyd's algorithm with k-means++ initialization, used for the mesh
//! clustering, plus an exact one-dimensional 2-means used to split each
//! controller's per-cluster activation profile into low and high groups.
//!
//! Determinism contract: identical inputs and seed give bit-identical
//! assignments regardless of thread count. The assignment step may run in
//! parallel (points are independent), centroid updates and all sums run in
//! fixed point order.

use crate::exec;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KMeansError {
    #[error("k = {k} is out of range (1 ..= {distinct} distinct points)")]
    InvalidK { k: usize, distinct: usize },
    #[error("non-finite coordinate in input points")]
    DegenerateInput,
    #[error("fewer than two distinct values")]
    ConstantInput,
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansParams {
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            max_iters: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index in `0..k` for each point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances of points to their assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Nearest centroid by squared distance; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = dist_sq(point, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    (best, best_d)
}

/// Checks that at least `k` distinct points exist; returns the true count
/// only when it is below `k`.
fn has_k_distinct<P: AsRef<[f64]>>(points: &[P], k: usize) -> Result<(), usize> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for p in points {
        seen.insert(p.as_ref().iter().map(|v| v.to_bits()).collect());
        if seen.len() >= k {
            return Ok(());
        }
    }
    Err(seen.len())
}

/// k-means++ seeding: first centroid uniform, the rest sampled with
/// probability proportional to squared distance from the chosen set.
fn kmeanspp_init<P: AsRef<[f64]> + Sync>(points: &[P], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centroids.push(points[first].as_ref().to_vec());

    let mut dist2 = exec::map_collect(points, |p| dist_sq(p.as_ref(), &centroids[0]));
    for _ in 1..k {
        let total: f64 = dist2.iter().sum();
        let r = rng.random::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = None;
        for (i, &d) in dist2.iter().enumerate() {
            cum += d;
            if cum > r {
                chosen = Some(i);
                break;
            }
        }
        // Floating-point slack: fall back to the last point with weight.
        let chosen = chosen.unwrap_or_else(|| {
            dist2
                .iter()
                .rposition(|&d| d > 0.0)
                .expect("total weight is positive")
        });
        let c = points[chosen].as_ref().to_vec();
        let new_d = exec::map_collect(points, |p| dist_sq(p.as_ref(), &c));
        for (d, nd) in dist2.iter_mut().zip(new_d) {
            if nd < *d {
                *d = nd;
            }
        }
        centroids.push(c);
    }
    centroids
}

/// Assigns every point to its nearest centroid and repairs empty clusters
/// by reseeding them on the point currently farthest from its centroid.
fn assign_with_repair<P: AsRef<[f64]> + Sync>(
    points: &[P],
    centroids: &mut [Vec<f64>],
) -> Vec<usize> {
    loop {
        let assigned = exec::map_collect(points, |p| nearest(p.as_ref(), centroids));
        let mut counts = vec![0usize; centroids.len()];
        for (k, _) in &assigned {
            counts[*k] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return assigned.into_iter().map(|(k, _)| k).collect();
        };
        let mut far_idx = 0;
        let mut far_d = -1.0;
        for (i, &(_, d)) in assigned.iter().enumerate() {
            if d > far_d {
                far_d = d;
                far_idx = i;
            }
        }
        centroids[empty] = points[far_idx].as_ref().to_vec();
    }
}

fn sse<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    let mut total = 0.0;
    for (p, &k) in points.iter().zip(assignments) {
        total += dist_sq(p.as_ref(), &centroids[k]);
    }
    total
}

fn update_means<P: AsRef<[f64]>>(
    points: &[P],
    assignments: &[usize],
    k: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0f64; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.as_ref()) {
            *s += v;
        }
    }
    for (sum, &c) in sums.iter_mut().zip(&counts) {
        debug_assert!(c > 0, "empty cluster after repair");
        for s in sum.iter_mut() {
            *s /= c as f64;
        }
    }
    sums
}

/// Lloyd's K-means over `points`, seeded and deterministic.
///
/// Stops when the relative inertia decrease falls below `params.tol` or
/// after `params.max_iters` assignment rounds. The result never contains
/// an empty cluster.
pub fn kmeans<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k: usize,
    params: &KMeansParams,
) -> Result<KMeansResult, KMeansError> {
    if k < 1 {
        return Err(KMeansError::InvalidK {
            k,
            distinct: points.len(),
        });
    }
    let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
    for p in points {
        assert_eq!(p.as_ref().len(), dim, "points must share one dimension");
        if p.as_ref().iter().any(|v| !v.is_finite()) {
            return Err(KMeansError::DegenerateInput);
        }
    }
    if let Err(distinct) = has_k_distinct(points, k) {
        return Err(KMeansError::InvalidK { k, distinct });
    }

    let mut centroids = kmeanspp_init(points, k, params.seed);
    let mut assignments = assign_with_repair(points, &mut centroids);
    let mut inertia = sse(points, &centroids, &assignments);
    let mut iterations = 1;

    while iterations < params.max_iters {
        let mut new_centroids = update_means(points, &assignments, k, dim);
        let new_assignments = assign_with_repair(points, &mut new_centroids);
        let new_inertia = sse(points, &new_centroids, &new_assignments);
        iterations += 1;
        debug_assert!(
            new_inertia <= inertia * (1.0 + 1e-12) + 1e-12,
            "inertia increased: {inertia} -> {new_inertia}"
        );
        let converged = inertia <= 0.0 || (inertia - new_inertia) < params.tol * inertia;
        centroids = new_centroids;
        assignments = new_assignments;
        inertia = new_inertia;
        if converged {
            break;
        }
    }

    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        iterations,
    })
}

/// Result of the exact 1-D 2-means split.
#[derive(Debug, Clone)]
pub struct TwoMeansSplit {
    /// Indices in the cluster with the smaller centroid, ascending.
    pub low: Vec<usize>,
    /// Indices in the cluster with the larger centroid, ascending.
    pub high: Vec<usize>,
    /// Midpoint between the two centroids.
    pub threshold: f64,
    /// Within-cluster sum of squares of the optimal split.
    pub inertia: f64,
}

/// Globally optimal 2-means partition of scalar values.
///
/// The optimum in one dimension is an interval split of the sorted order,
/// so scanning all n-1 split points finds it exactly; no seeding is
/// involved. Ties on inertia keep the leftmost split.
pub fn two_means_1d(values: &[f64]) -> Result<TwoMeansSplit, KMeansError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(KMeansError::DegenerateInput);
    }
    let n = values.len();
    if n < 2 || values.iter().all(|&v| v == values[0]) {
        return Err(KMeansError::ConstantInput);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));

    let mut prefix = vec![0.0f64; n + 1];
    let mut prefix_sq = vec![0.0f64; n + 1];
    for (pos, &idx) in order.iter().enumerate() {
        prefix[pos + 1] = prefix[pos] + values[idx];
        prefix_sq[pos + 1] = prefix_sq[pos] + values[idx] * values[idx];
    }
    let sse_range = |lo: usize, hi: usize| -> f64 {
        let len = (hi - lo) as f64;
        let s = prefix[hi] - prefix[lo];
        let s2 = prefix_sq[hi] - prefix_sq[lo];
        (s2 - s * s / len).max(0.0)
    };

    let mut best_split = 1;
    let mut best_sse = f64::INFINITY;
    for s in 1..n {
        let total = sse_range(0, s) + sse_range(s, n);
        if total < best_sse {
            best_sse = total;
            best_split = s;
        }
    }

    let mut low: Vec<usize> = order[..best_split].to_vec();
    let mut high: Vec<usize> = order[best_split..].to_vec();
    low.sort_unstable();
    high.sort_unstable();

    let mean = |set: &[usize]| set.iter().map(|&i| values[i]).sum::<f64>() / set.len() as f64;
    let (low_mean, high_mean) = (mean(&low), mean(&high));
    let two_pass = |set: &[usize], mu: f64| {
        set.iter()
            .map(|&i| (values[i] - mu) * (values[i] - mu))
            .sum::<f64>()
    };
    let inertia = two_pass(&low, low_mean) + two_pass(&high, high_mean);

    Ok(TwoMeansSplit {
        low,
        high,
        threshold: 0.5 * (low_mean + high_mean),
        inertia,
    })
}
