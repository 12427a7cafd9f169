//! Seeded k-means (k-means++ seeding, Lloyd iterations).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Iteration cap used by the solver.
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `c x dim`
    pub centroids: DenseMatrix,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step, first entry is the seeding.
    pub inertia_trace: Vec<f64>,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.row_iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &DenseMatrix, c: usize, rng: &mut impl Rng) -> DenseMatrix {
    let n = points.rows();
    let mut centroids = DenseMatrix::zeros(c, points.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points
        .row_iter()
        .map(|p| sq_dist(p, centroids.row(0)))
        .collect();
    for k in 1..c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // Guard against rounding landing on a zero-weight tail.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(k).copy_from_slice(points.row(pick));
        for (i, p) in points.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.row(k)));
        }
    }
    centroids
}

fn assign(points: &DenseMatrix, centroids: &DenseMatrix) -> (Vec<usize>, Vec<f64>) {
    points.row_iter().map(|p| nearest(p, centroids)).unzip()
}

/// Clusters the rows of `points` into `c` groups.
///
/// Deterministic for a fixed `seed`. Stops when no label changes or after
/// `max_iters` Lloyd steps. A cluster that loses all members is re-seeded at
/// the point farthest from its current centroid, provided that point is at
/// a positive distance.
pub fn kmeans(points: &DenseMatrix, c: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let n = points.rows();
    if c == 0 {
        return Err(Error::contract("k-means needs at least one cluster"));
    }
    if n < c {
        return Err(Error::contract(format!(
            "k-means with {c} clusters needs at least {c} points, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, c, &mut rng);
    let (mut labels, mut dists) = assign(points, &centroids);
    let mut inertia_trace = vec![dists.iter().sum::<f64>()];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;

        let mut sums = DenseMatrix::zeros(c, points.cols());
        let mut counts = vec![0usize; c];
        for (p, &k) in points.row_iter().zip(&labels) {
            counts[k] += 1;
            for (s, v) in sums.row_mut(k).iter_mut().zip(p) {
                *s += v;
            }
        }
        for k in 0..c {
            if counts[k] > 0 {
                let inv = 1.0 / counts[k] as f64;
                for (dst, s) in centroids.row_mut(k).iter_mut().zip(sums.row(k)) {
                    *dst = s * inv;
                }
            }
        }
        for (i, p) in points.row_iter().enumerate() {
            dists[i] = sq_dist(p, centroids.row(labels[i]));
        }
        for k in 0..c {
            if counts[k] > 0 {
                continue;
            }
            let far = dists
                .iter()
                .enumerate()
                .fold((0, 0.0), |(bi, bd), (i, &d)| if d > bd { (i, d) } else { (bi, bd) });
            if far.1 > 0.0 {
                centroids.row_mut(k).copy_from_slice(points.row(far.0));
                dists[far.0] = 0.0;
            }
        }

        let (new_labels, new_dists) = assign(points, &centroids);
        inertia_trace.push(new_dists.iter().sum());
        dists = new_dists;
        if new_labels == labels {
            break;
        }
        labels = new_labels;
    }

    Ok(KMeansResult {
        labels,
        centroids,
        inertia: *inertia_trace.last().expect("trace is never empty"),
        iterations,
        inertia_trace,
    })
}

/// One-hot `n x c` indicator matrix.
pub fn labels_to_indicator(labels: &[usize], c: usize) -> Result<DenseMatrix> {
    let mut m = DenseMatrix::zeros(labels.len(), c);
    for (i, &l) in labels.iter().enumerate() {
        if l >= c {
            return Err(Error::contract(format!("label {l} at {i} not below {c}")));
        }
        m[(i, l)] = 1.0;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::matched_accuracy;

    fn pts(rows: &[[f64; 2]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn distinct_points_one_per_cluster() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 5.0], [3.0, 3.0]]);
        for seed in 0..5 {
            let r = kmeans(&p, 4, seed, 100).unwrap();
            assert_eq!(r.inertia, 0.0);
            let mut l = r.labels.clone();
            l.sort();
            l.dedup();
            assert_eq!(l.len(), 4);
        }
    }

    #[test]
    fn identical_points_populate_one_cluster() {
        let p = pts(&[[1.0, 2.0]; 5]);
        let r = kmeans(&p, 2, 3, 100).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(r.labels.iter().all(|&l| l == r.labels[0]));
    }

    #[test]
    fn separates_two_blobs() {
        let p = pts(&[
            [0.0, 0.0],
            [0.1, 0.2],
            [0.2, 0.1],
            [-0.1, 0.1],
            [0.1, -0.1],
            [10.0, 10.0],
            [10.1, 9.9],
            [9.8, 10.2],
            [10.2, 10.1],
            [9.9, 9.9],
        ]);
        for seed in 0..10 {
            let r = kmeans(&p, 2, seed, 100).unwrap();
            assert!(r.labels[..5].iter().all(|&l| l == r.labels[0]));
            assert!(r.labels[5..].iter().all(|&l| l == r.labels[5]));
            assert_ne!(r.labels[0], r.labels[5]);
        }
    }

    #[test]
    fn too_few_points() {
        let p = pts(&[[0.0, 0.0]]);
        assert!(kmeans(&p, 2, 0, 10).is_err());
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = DenseMatrix::from_fn(60, 3, |_, _| rng.random::<f64>());
        let a = kmeans(&p, 5, 42, 100).unwrap();
        let b = kmeans(&p, 5, 42, 100).unwrap();
        assert_eq!(a, b);
        for w in a.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let centers = [[0.0, 0.0], [5.0, 5.0], [0.0, 8.0]];
        let p = DenseMatrix::from_fn(30, 2, |i, j| centers[i % 3][j] + rng.random::<f64>() * 0.5);
        let perm: Vec<usize> = (0..30).rev().collect();
        let q = DenseMatrix::from_fn(30, 2, |i, j| p[(perm[i], j)]);
        let a = kmeans(&p, 3, 7, 100).unwrap();
        let b = kmeans(&q, 3, 7, 100).unwrap();
        let a_perm: Vec<usize> = perm.iter().map(|&i| a.labels[i]).collect();
        assert_eq!(matched_accuracy(&a_perm, &b.labels).unwrap(), 1.0);
    }

    #[test]
    fn indicator() {
        let m = labels_to_indicator(&[0, 1], 2).unwrap();
        assert_eq!(m, DenseMatrix::identity(2));
        let m = labels_to_indicator(&[0, 0, 0], 3).unwrap();
        assert_eq!(m.col_sums(), vec![3.0, 0.0, 0.0]);
        let m = labels_to_indicator(&[2, 0, 1, 1], 3).unwrap();
        assert!(m.row_sums().iter().all(|&s| s == 1.0));
        assert!(labels_to_indicator(&[3], 3).is_err());
    }
}
