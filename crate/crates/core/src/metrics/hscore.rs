//! H-score: between-class variance read through the feature covariance.
//!
//! With population covariance `Cov(F)` and the covariance `Cov_b` of the
//! per-sample class-mean replacement of `F`, the score is
//! `tr(pinv(Cov(F)) * Cov_b)`. The pseudo-inverse drops eigenvalues below
//! `pinv_rcond` times the largest, which also makes the score invariant to
//! feature rescaling.

use ndarray::Array2;

use super::{MetricConfig, MetricFlag, MetricValue, MetricsError};
use crate::data::LabeledFeatureSet;
use crate::linalg::{population_covariance, sym_eig};
use crate::num::{count, real, Scalar};

pub fn h_score<R: Scalar>(
    set: &LabeledFeatureSet<R>,
    cfg: &MetricConfig,
) -> Result<MetricValue<R>, MetricsError> {
    let features = set.features();
    let labels = set.labels();
    let (n, d) = (features.nrows(), features.ncols());

    let mut class_sum: Vec<Vec<R>> = vec![vec![R::zero(); d]; set.n_classes() as usize];
    let mut class_count = vec![0usize; set.n_classes() as usize];
    for (row, &y) in features.rows().into_iter().zip(labels) {
        class_count[y as usize] += 1;
        for (acc, &v) in class_sum[y as usize].iter_mut().zip(row.iter()) {
            *acc += v;
        }
    }
    if class_count.iter().filter(|&&c| c > 0).count() < 2 {
        return Ok(MetricValue { value: R::zero(), flag: Some(MetricFlag::SingleClass) });
    }

    let (cov, _) = population_covariance(features);
    let mut replaced = Array2::<R>::zeros((n, d));
    for (i, &y) in labels.iter().enumerate() {
        let inv = R::one() / count::<R>(class_count[y as usize]);
        for j in 0..d {
            replaced[[i, j]] = class_sum[y as usize][j] * inv;
        }
    }
    let (cov_b, _) = population_covariance(&replaced);

    let (values, vectors) = sym_eig(&cov)?;
    let largest = values.iter().fold(R::zero(), |a, &b| a.max(b));
    let cutoff = largest * real::<R>(cfg.pinv_rcond);
    let mut score = R::zero();
    for (idx, &lambda) in values.iter().enumerate() {
        if lambda <= cutoff || lambda <= R::zero() {
            continue;
        }
        let v = vectors.column(idx);
        // v' Cov_b v / lambda
        let mut quad = R::zero();
        for a in 0..d {
            let mut inner = R::zero();
            for b in 0..d {
                inner += cov_b[[a, b]] * v[b];
            }
            quad += v[a] * inner;
        }
        score += quad / lambda;
    }
    Ok(MetricValue::clean(score))
}
