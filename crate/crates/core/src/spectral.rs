//! Affinity construction and normalized spectral clustering.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 30;
const KMEANS_MAX_ITER: usize = 300;

/// Symmetric, nonnegative `N x N` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(DMatrix<f64>);

impl AffinityMatrix {
    /// Wraps a matrix after checking it is square, nonnegative and symmetric
    /// within `1e-12`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dims(
                "affinity",
                "square matrix",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if a.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "affinity entries must be finite and nonnegative".into(),
            ));
        }
        if (&a - a.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidArgument("affinity is not symmetric".into()));
        }
        Ok(AffinityMatrix(a))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// `A = (1/V) sum_v (|Z_v| + |Z_v^T|) / 2`.
pub fn build_affinity(z: &[DMatrix<f64>]) -> Result<AffinityMatrix> {
    let first = z
        .first()
        .ok_or_else(|| Error::InvalidArgument("no representation matrices".into()))?;
    let n = first.nrows();
    let mut a = DMatrix::zeros(n, n);
    for zv in z {
        if zv.shape() != (n, n) {
            return Err(Error::dims(
                "build_affinity",
                format!("{n}x{n}"),
                format!("{}x{}", zv.nrows(), zv.ncols()),
            ));
        }
        let abs = zv.abs();
        a += (&abs + abs.transpose()) * 0.5;
    }
    a /= z.len() as f64;
    AffinityMatrix::new(a)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub clusters: usize,
}

/// Ng-Jordan-Weiss spectral clustering: top-`clusters` eigenvectors of
/// `D^{-1/2} A D^{-1/2}`, row-normalized, then k-means++ with `restarts`
/// restarts keeping the lowest inertia.
pub fn spectral_cluster(
    a: &AffinityMatrix,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterAssignment> {
    let n = a.n();
    if clusters == 0 {
        return Err(Error::InvalidArgument(
            "cluster count must be positive".into(),
        ));
    }
    if clusters > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {clusters} exceeds sample count {n}"
        )));
    }
    let embedding = spectral_embedding(a, clusters)?;
    let km = kmeans(&embedding, clusters, seed, restarts.max(1));
    Ok(ClusterAssignment {
        labels: km.labels,
        clusters,
    })
}

/// Row-normalized top-`dim` eigenvectors of the normalized affinity (`N x dim`).
pub fn spectral_embedding(a: &AffinityMatrix, dim: usize) -> Result<DMatrix<f64>> {
    let m = a.matrix();
    let n = m.nrows();
    let inv_sqrt: Vec<f64> = m
        .row_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut l = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    l = (&l + l.transpose()) * 0.5;
    let eig =
        SymmetricEigen::try_new(l, f64::EPSILON, 100 * n.max(10)).ok_or(Error::Numerical {
            context: "normalized affinity eigendecomposition did not converge",
            index: None,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .total_cmp(&eig.eigenvalues[x])
            .then(x.cmp(&y))
    });
    let mut emb = DMatrix::zeros(n, dim);
    for (c, &i) in order.iter().take(dim).enumerate() {
        emb.set_column(c, &eig.eigenvectors.column(i));
    }
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    points
        .row(i)
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(points, i, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.nrows();
    let row = |i: usize| points.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centers = vec![row(rng.random_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = i;
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(pick));
        let newest = centers.last().unwrap();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, newest));
        }
    }
    centers
}

fn lloyd(points: &DMatrix<f64>, mut centers: Vec<Vec<f64>>) -> KMeansResult {
    let (n, dim) = points.shape();
    let k = centers.len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points, i, &centers);
            dists[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        // refill empty clusters with the worst-fit points
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    labels[i] = c;
                    counts[c] = 1;
                    dists[i] = 0.0;
                    changed = true;
                }
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for i in 0..n {
            for (s, x) in sums[labels[i]].iter_mut().zip(points.row(i).iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points, i, &centers[labels[i]]))
        .sum();
    KMeansResult { labels, inertia }
}

/// Relabels clusters in order of first appearance.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// k-means++ / Lloyd on the rows of `points`. Restart `r` uses stream `r` of a
/// ChaCha generator seeded with `seed`; the lowest inertia wins, ties going to
/// the lowest restart index.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> KMeansResult {
    assert!(k >= 1 && k <= points.nrows(), "k must be in 1..=N");
    let runs: Vec<KMeansResult> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, kmeans_pp_init(points, k, &mut rng))
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, cur| {
            if cur.inertia < best.inertia {
                cur
            } else {
                best
            }
        })
        .expect("at least one restart");
    KMeansResult {
        labels: canonical_labels(&best.labels),
        inertia: best.inertia,
    }
}
