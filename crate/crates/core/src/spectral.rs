//! Normalized spectral clustering of a learned representation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, DenseMatrix};

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITER: usize = 300;

/// Symmetric nonnegative `n x n` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity(pub DenseMatrix);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub clusters: usize,
    /// Cluster ids that received no samples.
    pub empty_clusters: Vec<usize>,
}

/// `(|Z| + |Z^T|) / 2`.
pub fn affinity_from_representation(z: &DenseMatrix) -> Result<Affinity> {
    if !z.is_square() {
        return Err(Error::InvalidArgument(format!(
            "representation must be square, got {}x{}",
            z.nrows(),
            z.ncols()
        )));
    }
    let abs = z.abs();
    Ok(Affinity((&abs + abs.transpose()) * 0.5))
}

/// `I - D^{-1/2} A D^{-1/2}`, with zero degrees replaced by one.
pub fn normalized_laplacian(a: &Affinity) -> DenseMatrix {
    let a = &a.0;
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|row| {
            let d = row.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        let m = a[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - m
        } else {
            -m
        }
    })
}

/// Row-normalized eigenvectors of the `c` smallest eigenvalues of the
/// normalized Laplacian.
pub fn spectral_embedding(a: &Affinity, c: usize) -> Result<DenseMatrix> {
    let l = normalized_laplacian(a);
    let (_, vectors) = symmetric_eigen(&l)?;
    let mut emb = vectors.columns(0, c).into_owned();
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}

pub fn spectral_cluster(a: &Affinity, c: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = a.0.nrows();
    if !a.0.is_square() {
        return Err(Error::InvalidArgument("affinity must be square".into()));
    }
    if c < 2 || c > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count must lie in [2, {n}], got {c}"
        )));
    }
    let emb = spectral_embedding(a, c)?;
    Ok(kmeans(&emb, c, seed, KMEANS_RESTARTS, KMEANS_MAX_ITER))
}

#[derive(Debug, Clone)]
struct KMeansRun {
    labels: Vec<usize>,
    inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
        let newest = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, newest));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> KMeansRun {
    let n = points.len();
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centers);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // Reseed an empty cluster at the worst-served point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centers[labels[a]]);
                        let db = sq_dist(&points[b], &centers[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                centers[j] = points[far].clone();
            }
        }
    }
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (j, d) = nearest(p, &centers);
        labels[i] = j;
        inertia += d;
    }
    KMeansRun { labels, inertia }
}

/// Seeded k-means++ with `restarts` independent runs on the rows of
/// `data`; the lowest inertia wins, ties going to the earlier restart.
pub fn kmeans(
    data: &DenseMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> ClusterAssignment {
    let points: Vec<Vec<f64>> = data
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let runs: Vec<KMeansRun> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let centers = plus_plus_init(&points, k, &mut rng);
            lloyd(&points, centers, max_iter)
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.inertia.total_cmp(&b.inertia).then(ia.cmp(ib)))
        .map(|(_, run)| run)
        .expect("at least one restart");
    let mut counts = vec![0usize; k];
    for &l in &best.labels {
        counts[l] += 1;
    }
    ClusterAssignment {
        empty_clusters: (0..k).filter(|&j| counts[j] == 0).collect(),
        labels: best.labels,
        clusters: k,
    }
}
