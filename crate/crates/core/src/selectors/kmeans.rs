//! Lloyd's k-means over embedding rows, seeded by k-means++.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::gmm::{kmeans_plus_plus, squared_distance};
use crate::num::{count, Scalar};

#[derive(Debug, Error)]
pub enum KmeansError {
    #[error("no rows to cluster")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{n} rows cannot seed {k} clusters")]
    TooFewRows { n: usize, k: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KmeansFit<R> {
    /// `(k, d)` centroid matrix.
    pub centroids: Array2<R>,
    pub assignments: Vec<usize>,
    pub iterations: u32,
    /// True when an iteration left every assignment unchanged.
    pub converged: bool,
}

/// Index of the closest centroid row; ties go to the lowest index.
pub fn nearest_centroid<R: Scalar>(centroids: &Array2<R>, row: ArrayView1<R>) -> usize {
    let mut best = 0;
    let mut best_d = R::infinity();
    for (c, centroid) in centroids.rows().into_iter().enumerate() {
        let mut d = R::zero();
        for (a, b) in row.iter().zip(centroid.iter()) {
            let diff = *a - *b;
            d += diff * diff;
        }
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

pub fn kmeans<R: Scalar>(
    x: &Array2<R>,
    k: usize,
    seed: u64,
    max_iters: u32,
) -> Result<KmeansFit<R>, KmeansError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(KmeansError::Empty);
    }
    if k == 0 {
        return Err(KmeansError::ZeroK);
    }
    if n < k {
        return Err(KmeansError::TooFewRows { n, k });
    }
    let seeds = kmeans_plus_plus(x, k, seed);
    let mut centroids = Array2::<R>::zeros((k, d));
    for (c, center) in seeds.iter().enumerate() {
        for (j, v) in center.iter().enumerate() {
            centroids[[c, j]] = *v;
        }
    }
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iters {
        iterations += 1;
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = R::infinity();
            for c in 0..k {
                let row = centroids.row(c).to_vec();
                let dist = squared_distance(x, i, &row);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        // An emptied cluster keeps its previous centroid.
        let mut sums = Array2::<R>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for j in 0..d {
                sums[[assignments[i], j]] += x[[i, j]];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = R::one() / count::<R>(counts[c]);
            for j in 0..d {
                centroids[[c, j]] = sums[[c, j]] * inv;
            }
        }
    }
    Ok(KmeansFit { centroids, assignments, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn two_blobs() -> Array2<f64> {
        let mut gen = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        Array2::from_shape_fn((30, 2), |(i, _)| {
            let center = if i < 15 { -5.0 } else { 5.0 };
            center + gen.gen_range(-0.5..0.5)
        })
    }

    #[test]
    fn separated_blobs_are_split_cleanly() {
        let x = two_blobs();
        let fit = kmeans(&x, 2, 0, 100).unwrap();
        assert!(fit.converged);
        let first = fit.assignments[0];
        assert!(fit.assignments[..15].iter().all(|&a| a == first));
        assert!(fit.assignments[15..].iter().all(|&a| a == 1 - first));
        for c in 0..2 {
            let magnitude = fit.centroids[[c, 0]].abs();
            assert!((magnitude - 5.0).abs() < 0.5, "centroid at {magnitude}");
        }
    }

    #[test]
    fn single_cluster_centroid_is_the_mean() {
        let x = two_blobs();
        let fit = kmeans(&x, 1, 0, 100).unwrap();
        for j in 0..2 {
            let mean = x.column(j).sum() / 30.0;
            assert!((fit.centroids[[0, j]] - mean).abs() <= 1e-12);
        }
        assert!(fit.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn identical_rows_leave_extra_clusters_empty() {
        let x = Array2::<f64>::ones((4, 3));
        let fit = kmeans(&x, 2, 0, 50).unwrap();
        // Both seeds land on the same point; ties assign to cluster 0 and
        // the empty cluster keeps its centroid.
        assert!(fit.converged);
        assert!(fit.assignments.iter().all(|&a| a == 0));
        assert_eq!(fit.centroids.row(0), fit.centroids.row(1));
    }

    #[test]
    fn clustering_is_bitwise_deterministic() {
        let x = two_blobs();
        let a = kmeans(&x, 3, 7, 100).unwrap();
        let b = kmeans(&x, 3, 7, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nearest_centroid_breaks_ties_low() {
        let centroids = ndarray::arr2(&[[1.0, 0.0], [-1.0, 0.0]]);
        let probe = ndarray::arr1(&[0.0, 0.0]);
        assert_eq!(nearest_centroid(&centroids, probe.view()), 0);
        let off = ndarray::arr1(&[-0.4, 0.0]);
        assert_eq!(nearest_centroid(&centroids, off.view()), 1);
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let x = Array2::<f64>::zeros((2, 2));
        assert!(matches!(kmeans(&x, 0, 0, 10), Err(KmeansError::ZeroK)));
        assert!(matches!(kmeans(&x, 3, 0, 10), Err(KmeansError::TooFewRows { n: 2, k: 3 })));
        assert!(matches!(
            kmeans(&Array2::<f64>::zeros((0, 2)), 1, 0, 10),
            Err(KmeansError::Empty)
        ));
    }
}
