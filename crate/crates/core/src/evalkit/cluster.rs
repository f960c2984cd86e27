//! k-means and clustering quality on the follow graph.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::netcore::HeterogeneousNetwork;
use crate::seed;

/// Separability reported when no edge crosses clusters.
pub const SEPARABILITY_SENTINEL: f64 = 1e9;

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Cluster id of each point, in `0..k`.
    pub assignments: Vec<usize>,
    pub k: usize,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 10,
            max_iter: 300,
        }
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: each new centre is drawn with probability
/// proportional to the squared distance to the nearest existing one.
fn seed_centres(x: &Array2<f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centres = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centres.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centres.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centres.row_mut(c).assign(&x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centres.row(c)));
        }
    }
    centres
}

fn lloyd(x: &Array2<f64>, mut centres: Array2<f64>, max_iter: usize) -> Clustering {
    let (n, k) = (x.nrows(), centres.nrows());
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = sq_dist(x.row(i), centres.row(c));
                if d < best.0 {
                    best = (d, c);
                }
            }
            if assignments[i] != best.1 {
                assignments[i] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centres.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &x.row(i));
            counts[c] += 1;
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centre
            if counts[c] > 0 {
                centres.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
    }
    let inertia = assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(x.row(i), centres.row(c)))
        .sum();
    Clustering { assignments, k, inertia }
}

/// Lloyd's algorithm from k-means++ seeds, best inertia over restarts.
pub fn kmeans(x: &Array2<f64>, k: usize, seed: u64) -> Result<Clustering> {
    kmeans_with(x, k, &KMeansConfig::default(), seed)
}

pub fn kmeans_with(x: &Array2<f64>, k: usize, cfg: &KMeansConfig, seed: u64) -> Result<Clustering> {
    if k == 0 || k > x.nrows() {
        return Err(Error::InvalidClusterCount { k, n: x.nrows() });
    }
    let mut best: Option<Clustering> = None;
    for r in 0..cfg.restarts.max(1) {
        let mut rng = seed::rng(seed::derive_indexed(seed, "kmeans/restart", r));
        let c = lloyd(x, seed_centres(x, k, &mut rng), cfg.max_iter);
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    Ok(best.unwrap())
}

/// Each of `n` points assigned uniformly at random to one of `k` clusters.
pub fn random_clustering(n: usize, k: usize, seed: u64) -> Result<Clustering> {
    if k == 0 || k > n {
        return Err(Error::InvalidClusterCount { k, n });
    }
    let mut rng = seed::rng(seed);
    Ok(Clustering {
        assignments: (0..n).map(|_| rng.random_range(0..k)).collect(),
        k,
        inertia: f64::NAN,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommunityMetrics {
    pub density: f64,
    pub separability: f64,
    pub coverage: f64,
    pub expansion: f64,
}

/// Quality of a clustering on the undirected follow graph (an edge exists
/// between `u` and `v` if either follows the other). With `m` edges of
/// which `intra` lie inside clusters:
///
/// * coverage = intra / m
/// * expansion = 1 - coverage, which equals cross / m
/// * separability = intra / cross, or [`SEPARABILITY_SENTINEL`] when
///   cross = 0
/// * density = intra / Σ_S C(|S|, 2), or 0 when every cluster is a
///   singleton
pub fn community_metrics(net: &HeterogeneousNetwork, clustering: &Clustering) -> Result<CommunityMetrics> {
    let n = net.n_users();
    if clustering.assignments.len() != n {
        return Err(Error::LengthMismatch(clustering.assignments.len(), n));
    }
    let edges: HashSet<(usize, usize)> = net.follows().iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    if edges.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let a = &clustering.assignments;
    let m = edges.len();
    let intra = edges.iter().filter(|&&(u, v)| a[u] == a[v]).count();
    let cross = m - intra;
    let mut sizes = vec![0u64; clustering.k.max(a.iter().max().map_or(0, |&c| c + 1))];
    for &c in a {
        sizes[c] += 1;
    }
    let pairs: u64 = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let coverage = intra as f64 / m as f64;
    Ok(CommunityMetrics {
        density: if pairs == 0 { 0.0 } else { intra as f64 / pairs as f64 },
        separability: if cross == 0 {
            SEPARABILITY_SENTINEL
        } else {
            intra as f64 / cross as f64
        },
        coverage,
        expansion: 1.0 - coverage,
    })
}
