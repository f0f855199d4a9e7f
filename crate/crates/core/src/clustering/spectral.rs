use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::seeded_rng;

pub const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 300;

/// `(|Q| + |Q|ᵀ)/2` with a zero diagonal.
pub fn affinity(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (q[(i, j)].abs() + q[(j, i)].abs())
        }
    })
}

/// `I − D^{−1/2} A D^{−1/2}`; rows with zero degree stay as identity rows.
pub fn normalized_laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let off = -inv_sqrt[i] * a[(i, j)] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    })
}

/// Row-normalized embedding from the eigenvectors of the `k` smallest
/// Laplacian eigenvalues. Returns `n × k`.
fn spectral_embedding(laplacian: DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = laplacian.nrows();
    let eig = SymmetricEigen::new(laplacian);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]).then(a.cmp(b)));
    let mut emb = DMatrix::zeros(n, k);
    for (dst, src) in order.iter().take(k).enumerate() {
        emb.set_column(dst, &eig.eigenvectors.column(*src));
    }
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    emb
}

/// Spectral clustering of the affinity derived from a self-expression
/// matrix. Labels are canonical: cluster ids appear in order of first
/// occurrence.
pub fn spectral_cluster(q: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "self-expression matrix columns",
            expected: n,
            actual: q.ncols(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {n} points")));
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }
    let emb = spectral_embedding(normalized_laplacian(&affinity(q)), k);
    let points: Vec<Vec<f64>> = emb.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(kmeans(&points, k, seed).labels)
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ with [`KMEANS_RESTARTS`] restarts; the lowest inertia
/// wins and ties go to the lowest restart index.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> KMeansResult {
    let runs: Vec<KMeansResult> = (0..KMEANS_RESTARTS)
        .into_par_iter()
        .map(|r| kmeans_once(points, k, seed, r as u64))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    let mut out = runs.into_iter().nth(best).expect("at least one restart");
    out.labels = canonical_labels(&out.labels);
    out
}

fn kmeans_once(points: &[Vec<f64>], k: usize, seed: u64, restart: u64) -> KMeansResult {
    let n = points.len();
    let mut rng = seeded_rng(seed, restart);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![0usize; n];
    for iter in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, l) in points.iter().zip(&labels) {
            counts[*l] += 1;
            for (s, v) in sums[*l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, l)| sq_dist(p, &centers[*l]))
        .sum();
    KMeansResult { labels, inertia }
}

/// Renames cluster ids so they appear in order of first occurrence.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|l| match map.iter().find(|(from, _)| from == l) {
            Some((_, to)) => *to,
            None => {
                let to = map.len();
                map.push((*l, to));
                to
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::metrics::clustering_accuracy;

    fn block_q(sizes: &[usize]) -> (DMatrix<f64>, Vec<usize>) {
        let n: usize = sizes.iter().sum();
        let mut truth = Vec::with_capacity(n);
        for (b, s) in sizes.iter().enumerate() {
            truth.extend(std::iter::repeat_n(b, *s));
        }
        let q = DMatrix::from_fn(n, n, |i, j| if truth[i] == truth[j] { 0.3 + 0.01 * ((i + j) % 5) as f64 } else { 0.0 });
        (q, truth)
    }

    #[test]
    fn two_blocks_are_separated() {
        let (q, truth) = block_q(&[6, 9]);
        let labels = spectral_cluster(&q, 2, 1).unwrap();
        assert_eq!(clustering_accuracy(&labels, &truth).unwrap().0, 1.0);
    }

    #[test]
    fn single_cluster_is_all_zero() {
        let (q, _) = block_q(&[4, 4]);
        assert_eq!(spectral_cluster(&q, 1, 0).unwrap(), vec![0; 8]);
    }

    #[test]
    fn identity_with_k_equal_n_gives_singletons() {
        let labels = spectral_cluster(&DMatrix::identity(6, 6), 6, 4).unwrap();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        assert!(spectral_cluster(&DMatrix::identity(3, 3), 4, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (q, _) = block_q(&[5, 5, 5]);
        assert_eq!(spectral_cluster(&q, 3, 9).unwrap(), spectral_cluster(&q, 3, 9).unwrap());
    }

    #[test]
    fn invariant_under_simultaneous_permutation() {
        let (q, _) = block_q(&[5, 7, 4]);
        let n = q.nrows();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let qp = DMatrix::from_fn(n, n, |i, j| q[(perm[i], perm[j])]);
        let base = spectral_cluster(&q, 3, 2).unwrap();
        let permuted = spectral_cluster(&qp, 3, 2).unwrap();
        let expected: Vec<usize> = perm.iter().map(|p| base[*p]).collect();
        assert_eq!(clustering_accuracy(&permuted, &expected).unwrap().0, 1.0);
    }

    #[test]
    fn laplacian_handles_isolated_nodes() {
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let l = normalized_laplacian(&a);
        assert_eq!(l[(2, 2)], 1.0);
        assert_eq!(l[(0, 1)], -1.0);
    }

    #[test]
    fn canonical_relabeling() {
        assert_eq!(canonical_labels(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
    }
}
