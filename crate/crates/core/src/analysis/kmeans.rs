//! Lloyd's k-means with k-means++ seeding.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Independent seedings; the lowest final inertia wins (first on ties).
    pub n_init: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { k: 4, seed: 0, max_iter: 300, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning run.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest index on ties.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn inertia(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().expect("pushed")));
        }
    }
    centroids
}

fn means(points: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    (sums, counts)
}

/// Moves the point farthest from its centroid in the largest cluster into
/// each empty cluster.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    loop {
        let (centroids, counts) = means(points, labels, k, dim);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        let largest = (0..k).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
        let far = (0..points.len())
            .filter(|&i| labels[i] == largest)
            .fold(None, |best: Option<(usize, f64)>, i| {
                let d = sq_dist(&points[i], &centroids[largest]);
                match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                }
            })
            .expect("largest cluster is non-empty")
            .0;
        labels[far] = empty;
    }
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeansResult {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let (c, _) = nearest(p, &centroids);
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        history.push(inertia(points, &labels, &centroids));
        if !changed {
            converged = true;
            break;
        }
        centroids = repair_empty(points, &mut labels, k, dim);
    }
    let final_inertia = inertia(points, &labels, &centroids);
    KMeansResult { labels, centroids, inertia: final_inertia, inertia_history: history, iterations, converged }
}

/// Clusters `points` into `k` groups; deterministic for a fixed seed.
pub fn kmeans(points: &[Vec<f64>], params: &KMeansParams) -> Result<KMeansResult> {
    let k = params.k;
    if k == 0 {
        return Err(Error::parameter("k", "must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::Data(format!("{} points cannot form {k} clusters", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Data("points have different dimensions".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for init in 0..params.n_init.max(1) {
        let mut rng = seed::rng(seed::derive_indexed(params.seed, stream::KMEANS, init as u64));
        let run = lloyd(points, plus_plus(points, k, &mut rng), params.max_iter.max(1));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one init"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn square_corners() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let r = kmeans(&pts, &KMeansParams { k: 4, ..Default::default() }).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_few_points() {
        let e = kmeans(&[vec![0.0]], &KMeansParams { k: 2, ..Default::default() });
        assert!(matches!(e, Err(Error::Data(_))));
    }

    #[test]
    fn two_blobs_recovered() {
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut worst: f64 = 1.0;
        for s in 0..100u64 {
            let mut rng = seed::rng(1000 + s);
            let mut pts = Vec::new();
            let mut truth = Vec::new();
            for b in 0..2 {
                for _ in 0..50 {
                    let cx = if b == 0 { 0.0 } else { 10.0 };
                    pts.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
                    truth.push(b);
                }
            }
            let r = kmeans(&pts, &KMeansParams { k: 2, seed: s, n_init: 1, ..Default::default() }).unwrap();
            let agree = r.labels.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / 100.0;
            worst = worst.min(agree.max(1.0 - agree));
        }
        assert!(worst >= 0.99, "worst agreement {worst}");
    }

    #[test]
    fn labels_are_a_fixed_point_and_inertia_is_monotone() {
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rng = seed::rng(4);
        let pts: Vec<Vec<f64>> = (0..120).map(|_| (0..3).map(|_| noise.sample(&mut rng)).collect()).collect();
        let r = kmeans(&pts, &KMeansParams { k: 5, seed: 8, ..Default::default() }).unwrap();
        assert!(r.converged);
        for (p, &l) in pts.iter().zip(&r.labels) {
            assert_eq!(nearest(p, &r.centroids).0, l);
        }
        assert!(r.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert_eq!(r, kmeans(&pts, &KMeansParams { k: 5, seed: 8, ..Default::default() }).unwrap());
    }

    #[test]
    fn duplicate_points_fill_every_cluster() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![5.0]];
        let r = kmeans(&pts, &KMeansParams { k: 3, ..Default::default() }).unwrap();
        let mut used = r.labels.clone();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 3);
    }
}
