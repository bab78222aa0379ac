//! Lloyd's k-means with greedy distance-weighted seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sq_dist, PointSet};

pub const DEFAULT_MAX_ITERS: usize = 100;

/// Recorded in model metadata so reduced models can be reproduced.
pub const KMEANS_INIT: &str = "greedy-kmeans++(trials=2+ln k)/chacha8";

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: PointSet,
    /// Nearest centroid of every input row (ties to the lowest centroid index).
    pub assignment: Vec<usize>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each centroid update.
    pub inertia_history: Vec<f64>,
}

pub fn kmeans(p: &PointSet, k: usize, max_iters: usize, seed: u64) -> Result<KMeansResult> {
    let n = p.len();
    if k == 0 || k > n {
        return Err(Error::usage(format!("k must lie in [1, {n}], got {k}")));
    }
    let d = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_centers(p, k, &mut rng);

    let mut assignment = assign(p, &centroids, k);
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        repair_empty(p, &centroids, &mut assignment, k);
        centroids = means(p, &assignment, k, d);
        inertia_history.push(inertia(p, &centroids, &assignment));
        let next = assign(p, &centroids, k);
        if next == assignment {
            break;
        }
        assignment = next;
    }

    Ok(KMeansResult {
        centroids: PointSet::new(centroids, k, d)?,
        assignment,
        iterations,
        inertia_history,
    })
}

fn init_centers(p: &PointSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = p.len();
    let d = p.dim();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(p.row(first));
    let mut closest: Vec<f64> = p.rows().map(|r| sq_dist(r, p.row(first))).collect();

    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if total > 0.0 {
                sample_weighted(&closest, total, rng)
            } else {
                // every row coincides with a chosen center
                rng.random_range(0..n)
            };
            let updated: Vec<f64> = p
                .rows()
                .zip(&closest)
                .map(|(r, &c)| c.min(sq_dist(r, p.row(cand))))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, updated));
            }
        }
        let (_, cand, updated) = best.expect("at least two trials");
        centers.extend_from_slice(p.row(cand));
        closest = updated;
    }
    centers
}

fn sample_weighted(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let target = rng.random_range(0.0..total);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

fn nearest_center(x: &[f64], centers: &[f64], k: usize) -> (usize, f64) {
    let d = x.len();
    let mut best = (0, f64::INFINITY);
    for c in 0..k {
        let s = sq_dist(x, &centers[c * d..(c + 1) * d]);
        if s < best.1 {
            best = (c, s);
        }
    }
    best
}

fn assign(p: &PointSet, centers: &[f64], k: usize) -> Vec<usize> {
    (0..p.len())
        .into_par_iter()
        .map(|i| nearest_center(p.row(i), centers, k).0)
        .collect()
}

/// Moves the row farthest from its centroid in the largest cluster into each
/// empty cluster.
fn repair_empty(p: &PointSet, centers: &[f64], assignment: &mut [usize], k: usize) {
    let d = p.dim();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
        let center = &centers[largest * d..(largest + 1) * d];
        let mut far = (usize::MAX, f64::NEG_INFINITY);
        for (i, &a) in assignment.iter().enumerate() {
            if a == largest {
                let s = sq_dist(p.row(i), center);
                if s > far.1 {
                    far = (i, s);
                }
            }
        }
        assignment[far.0] = empty;
    }
}

fn means(p: &PointSet, assignment: &[usize], k: usize, d: usize) -> Vec<f64> {
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (row, &a) in p.rows().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        for s in &mut sums[c * d..(c + 1) * d] {
            *s /= cnt as f64;
        }
    }
    sums
}

fn inertia(p: &PointSet, centers: &[f64], assignment: &[usize]) -> f64 {
    let d = p.dim();
    p.rows()
        .zip(assignment)
        .map(|(r, &a)| sq_dist(r, &centers[a * d..(a + 1) * d]))
        .sum()
}
