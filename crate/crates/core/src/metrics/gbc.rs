//! Class-overlap transferability score from per-class Gaussian fits.
//!
//! Each present class gets a diagonal Gaussian (population moments). The
//! score sums Bhattacharyya overlaps `exp(-BD)` over unordered class pairs
//! and negates, so heavy overlap drags it toward `-pairs` and clean
//! separation brings it up toward zero.

use super::{GbcCovarianceKind, MetricConfig, MetricFlag, MetricValue, MetricsError};
use crate::data::LabeledFeatureSet;
use crate::num::{count, real, Scalar};

struct ClassGaussian<R> {
    mean: Vec<R>,
    var: Vec<R>,
}

fn bhattacharyya<R: Scalar>(a: &ClassGaussian<R>, b: &ClassGaussian<R>) -> R {
    let half = real::<R>(0.5);
    let eighth = real::<R>(0.125);
    let mut dist = R::zero();
    for j in 0..a.mean.len() {
        let pooled = half * (a.var[j] + b.var[j]);
        let dm = a.mean[j] - b.mean[j];
        dist += eighth * dm * dm / pooled;
        dist += half * (pooled.ln() - half * (a.var[j].ln() + b.var[j].ln()));
    }
    dist
}

pub fn gbc<R: Scalar>(
    set: &LabeledFeatureSet<R>,
    cfg: &MetricConfig,
) -> Result<MetricValue<R>, MetricsError> {
    let GbcCovarianceKind::Diagonal = cfg.gbc_cov;
    let d = set.dim();
    let floor = real::<R>(cfg.gmm_reg);
    let mut gaussians: Vec<ClassGaussian<R>> = Vec::new();
    for class in 0..set.n_classes() {
        let rows: Vec<usize> = set
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(MetricsError::ClassTooSmall { class, count: rows.len(), needed: 2 });
        }
        let inv = R::one() / count::<R>(rows.len());
        let mut mean = vec![R::zero(); d];
        for &i in &rows {
            for (j, slot) in mean.iter_mut().enumerate() {
                *slot += set.features()[[i, j]];
            }
        }
        for slot in &mut mean {
            *slot *= inv;
        }
        let mut var = vec![R::zero(); d];
        for &i in &rows {
            for (j, slot) in var.iter_mut().enumerate() {
                let dv = set.features()[[i, j]] - mean[j];
                *slot += dv * dv;
            }
        }
        for (j, slot) in var.iter_mut().enumerate() {
            *slot *= inv;
            if *slot <= R::zero() && floor <= R::zero() {
                return Err(MetricsError::ZeroVariance { class, dim: j });
            }
            if *slot < floor {
                *slot = floor;
            }
        }
        gaussians.push(ClassGaussian { mean, var });
    }
    if gaussians.len() < 2 {
        return Ok(MetricValue { value: R::zero(), flag: Some(MetricFlag::SingleClass) });
    }
    let mut score = R::zero();
    for a in 0..gaussians.len() {
        for b in 0..a {
            score -= (-bhattacharyya(&gaussians[a], &gaussians[b])).exp();
        }
    }
    Ok(MetricValue::clean(score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};

    fn set(x: Array2<f64>, labels: Vec<u32>, classes: u32) -> LabeledFeatureSet<f64> {
        LabeledFeatureSet::new(x, labels, classes).unwrap()
    }

    #[test]
    fn unit_variance_classes_two_apart_hit_the_closed_form() {
        // Means 0 and 2, population variance 1 on both sides.
        let s = set(array![[-1.0], [1.0], [1.0], [3.0]], vec![0, 0, 1, 1], 2);
        let v = gbc(&s, &MetricConfig::default()).unwrap();
        assert_abs_diff_eq!(v.value, -(-0.5f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(v.value, -0.60653, epsilon = 1e-5);
    }

    #[test]
    fn identical_class_distributions_score_minus_one() {
        let s = set(array![[0.0], [2.0], [0.0], [2.0]], vec![0, 0, 1, 1], 2);
        let v = gbc(&s, &MetricConfig::default()).unwrap();
        assert_abs_diff_eq!(v.value, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn widening_the_gap_raises_the_score() {
        let mut prev = f64::NEG_INFINITY;
        for gap in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let s = set(
                array![[-1.0], [1.0], [gap - 1.0], [gap + 1.0]],
                vec![0, 0, 1, 1],
                2,
            );
            let v = gbc(&s, &MetricConfig::default()).unwrap().value;
            assert!(v > prev, "gap {gap}: {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn score_is_bounded_by_the_pair_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = 18;
            let x = Array2::<f64>::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0));
            let labels: Vec<u32> = (0..n as u32).map(|i| i % 3).collect();
            let v = gbc(&set(x, labels, 3), &MetricConfig::default()).unwrap().value;
            assert!(v < 0.0 && v >= -3.0, "three classes give three pairs, got {v}");
        }
    }

    #[test]
    fn single_present_class_is_flagged_zero() {
        let s = set(array![[0.0], [1.0], [2.0]], vec![1, 1, 1], 3);
        let v = gbc(&s, &MetricConfig::default()).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.flag, Some(MetricFlag::SingleClass));
    }

    #[test]
    fn undersized_class_is_rejected() {
        let s = set(array![[0.0], [1.0], [2.0]], vec![0, 0, 1], 2);
        assert!(matches!(
            gbc(&s, &MetricConfig::default()),
            Err(MetricsError::ClassTooSmall { class: 1, count: 1, needed: 2 })
        ));
    }

    #[test]
    fn flat_dimension_is_floored_not_divided_by_zero() {
        // Second dimension is constant inside each class.
        let s = set(
            array![[0.0, 5.0], [2.0, 5.0], [6.0, 5.0], [8.0, 5.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let v = gbc(&s, &MetricConfig::default()).unwrap();
        assert!(v.value.is_finite());
        let strict = MetricConfig { gmm_reg: 0.0, ..MetricConfig::default() };
        assert!(matches!(
            gbc(&s, &strict),
            Err(MetricsError::ZeroVariance { class: 0, dim: 1 })
        ));
    }
}
