use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const MAX_ITERATIONS: usize = 200;
/// Independent k-means++ restarts; the lowest-inertia run is kept.
pub const RESTARTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<u32>,
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    pub iterations: usize,
}

/// Lloyd's k-means on `points` (`n × dim`, row-major) with k-means++ seeding.
///
/// Assignment ties go to the lowest cluster index. A cluster that empties is
/// re-seeded with the point farthest from its current centroid.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> KMeansResult {
    assert!(dim > 0 && points.len() % dim == 0);
    let n = points.len() / dim;
    assert!(k >= 1 && k <= n, "k = {k} with {n} points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..RESTARTS {
        let run = lloyd(points, dim, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[f64], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

fn plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // Every point coincides with a center; any choice is equivalent.
            0
        };
        centroids.extend_from_slice(point(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), point(pick)));
        }
    }
    centroids
}

fn lloyd(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let n = points.len() / dim;
    let mut centroids = plus_plus(points, dim, k, rng);
    let mut labels = vec![u32::MAX; n];
    let mut iterations = 0;
    loop {
        let assigned: Vec<(u32, f64)> = points
            .par_chunks_exact(dim)
            .map(|p| nearest(p, &centroids, dim))
            .collect();
        let changed = assigned.iter().zip(&labels).any(|(a, &l)| a.0 != l);
        for (l, a) in labels.iter_mut().zip(&assigned) {
            *l = a.0;
        }
        let inertia: f64 = assigned.iter().map(|a| a.1).sum();
        if !changed || iterations >= MAX_ITERATIONS {
            return KMeansResult {
                labels,
                centroids,
                inertia,
                iterations,
            };
        }
        iterations += 1;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, p) in points.chunks_exact(dim).enumerate() {
            let c = labels[i] as usize;
            counts[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c * dim..(c + 1) * dim] {
                    *s /= counts[c] as f64;
                }
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i] as usize] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(far) = far {
                counts[labels[far] as usize] -= 1;
                counts[c] = 1;
                labels[far] = c as u32;
                dist[far] = 0.0;
                sums[c * dim..(c + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
            }
        }
        centroids = sums;
    }
}
