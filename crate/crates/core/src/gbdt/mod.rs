//! Gradient-boosted regression trees with ranking objectives.
//!
//! Training is sequential and allocation-stable, so two runs with the
//! same inputs produce bitwise-identical models regardless of thread
//! count. Prediction is `base_score` plus the sum of shrunken leaf
//! weights; ranking objectives keep the base at zero so scores are pure
//! preference values, while the pointwise objective bases at the target
//! mean and therefore reproduces a constant target exactly.

mod objective;
mod tree;

pub use objective::Objective;
pub use tree::{Node, Tree};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

use crate::num::{count, real, Scalar};
use crate::rankcorr::descending_order;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: u32,
    pub max_depth: u32,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub objective: Objective,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 2,
            objective: Objective::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("no training instances")]
    Empty,
    #[error("{rows} feature rows vs {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("bad query groups: {0}")]
    BadGroups(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainWarning {
    /// Every target is identical; the model is the constant base score.
    ConstantTargets,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub warnings: Vec<TrainWarning>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbdtModel<R> {
    pub objective: Objective,
    pub base_score: R,
    pub trees: Vec<Tree<R>>,
}

impl<R: Scalar> GbdtModel<R> {
    pub fn predict_row(&self, row: ArrayView1<R>) -> R {
        let mut score = self.base_score;
        for tree in &self.trees {
            score += tree.predict_row(row);
        }
        score
    }

    pub fn predict(&self, features: &Array2<R>) -> Vec<R> {
        (0..features.nrows())
            .map(|i| self.predict_row(features.row(i)))
            .collect()
    }

    /// Row indices with scores, best first, ties by index.
    pub fn rank(&self, features: &Array2<R>) -> Vec<(usize, R)> {
        let scores = self.predict(features);
        descending_order(&scores)
            .into_iter()
            .map(|i| (i, scores[i]))
            .collect()
    }
}

fn check_groups(groups: &[Range<usize>], n: usize) -> Result<(), GbdtError> {
    let mut at = 0;
    for (k, range) in groups.iter().enumerate() {
        if range.start != at {
            return Err(GbdtError::BadGroups(format!(
                "group {k} starts at {} but {at} instances are covered",
                range.start
            )));
        }
        if range.is_empty() {
            return Err(GbdtError::BadGroups(format!("group {k} is empty")));
        }
        at = range.end;
    }
    if at != n {
        return Err(GbdtError::BadGroups(format!("groups cover {at} of {n} instances")));
    }
    Ok(())
}

/// Fit a boosted ensemble. `groups` must tile `0..n` in order; ranking
/// objectives form pairs only inside a group.
pub fn train<R: Scalar>(
    features: &Array2<R>,
    targets: &[R],
    groups: &[Range<usize>],
    params: &GbdtParams,
) -> Result<(GbdtModel<R>, TrainReport), GbdtError> {
    let n = features.nrows();
    if n == 0 {
        return Err(GbdtError::Empty);
    }
    if targets.len() != n {
        return Err(GbdtError::LengthMismatch { rows: n, targets: targets.len() });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(GbdtError::NonFinite { what: "features" });
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(GbdtError::NonFinite { what: "targets" });
    }
    check_groups(groups, n)?;

    let base_score = match params.objective {
        Objective::Pointwise => targets.iter().copied().sum::<R>() / count::<R>(n),
        _ => R::zero(),
    };
    let mut report = TrainReport::default();
    let model = GbdtModel { objective: params.objective, base_score, trees: Vec::new() };
    if targets.iter().all(|&t| t == targets[0]) {
        report.warnings.push(TrainWarning::ConstantTargets);
        return Ok((model, report));
    }
    let mut model = model;

    let sorted = tree::presort(features);
    let mut scratch = tree::SplitScratch::new(features, &sorted);
    let ctx = objective::GroupContext::new(targets, groups);
    let mut preds = vec![base_score; n];
    let mut grad = vec![R::zero(); n];
    let mut hess = vec![R::zero(); n];
    let shrink = real::<R>(params.learning_rate);

    for _ in 0..params.n_trees {
        objective::gradients(
            params.objective,
            &preds,
            targets,
            groups,
            &ctx,
            &mut grad,
            &mut hess,
        );
        let mut fitted = tree::TreeBuilder::new(
            features,
            &sorted,
            &grad,
            &hess,
            params.max_depth,
            params.min_samples_leaf,
            &mut scratch,
        )
        .build();
        fitted.scale_leaves(shrink);
        for (i, p) in preds.iter_mut().enumerate() {
            *p += fitted.predict_row(features.row(i));
        }
        model.trees.push(fitted);
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn params(objective: Objective) -> GbdtParams {
        GbdtParams { objective, ..GbdtParams::default() }
    }

    #[test]
    fn constant_targets_give_the_constant_model_and_a_warning() {
        let x = Array2::from_shape_fn((8, 2), |(i, j)| (i * 2 + j) as f64);
        let y = vec![2.5; 8];
        let (model, report) = train(&x, &y, &[0..8], &params(Objective::Pointwise)).unwrap();
        assert_eq!(report.warnings, vec![TrainWarning::ConstantTargets]);
        assert!(model.trees.is_empty());
        for p in model.predict(&x) {
            assert_abs_diff_eq!(p, 2.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn pointwise_fits_a_linear_function() {
        let n = 64;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        let y: Vec<f64> = (0..n).map(|i| 3.0 * (i as f64 / n as f64) - 1.0).collect();
        let p = GbdtParams { n_trees: 200, ..params(Objective::Pointwise) };
        let (model, _) = train(&x, &y, &[0..n], &p).unwrap();
        let mse = objective::mse(&model.predict(&x), &y);
        assert!(mse < 1e-3, "train mse {mse}");
    }

    #[test]
    fn duplicated_feature_column_changes_nothing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 40;
        let one = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0f64));
        let two = Array2::from_shape_fn((n, 2), |(i, _)| one[[i, 0]]);
        let y: Vec<f64> = (0..n).map(|i| one[[i, 0]].sin()).collect();
        let (a, _) = train(&one, &y, &[0..n], &params(Objective::Pointwise)).unwrap();
        let (b, _) = train(&two, &y, &[0..n], &params(Objective::Pointwise)).unwrap();
        // Gain ties between the twin columns resolve to the lower index,
        // so the twin never changes the fitted function.
        assert_eq!(a.predict(&one), b.predict(&two));
    }

    #[test]
    fn min_samples_leaf_blocks_splits_on_tiny_nodes() {
        let x = Array2::from_shape_fn((3, 1), |(i, _)| i as f64);
        let y = vec![0.0, 1.0, 5.0];
        let (model, _) = train(&x, &y, &[0..3], &params(Objective::Pointwise)).unwrap();
        // Three instances cannot form two leaves of two, so every tree is
        // a stump and every prediction equals the base score.
        let preds = model.predict(&x);
        assert_eq!(preds[0], preds[1]);
        assert_eq!(preds[1], preds[2]);
        assert_abs_diff_eq!(preds[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0f64));
        let y: Vec<f64> = (0..n).map(|i| x[[i, 0]] - 0.3 * x[[i, 2]]).collect();
        let groups = [0..20, 20..40, 40..n];
        let (a, _) = train(&x, &y, &groups, &params(Objective::LambdaNdcg)).unwrap();
        let (b, _) = train(&x, &y, &groups, &params(Objective::LambdaNdcg)).unwrap();
        let pa: Vec<u64> = a.predict(&x).iter().map(|v| v.to_bits()).collect();
        let pb: Vec<u64> = b.predict(&x).iter().map(|v| v.to_bits()).collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn midpoint_threshold_separates_two_points() {
        let x = Array2::from_shape_fn((2, 1), |(i, _)| i as f64);
        let y = vec![0.0, 1.0];
        let p = GbdtParams {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            min_samples_leaf: 1,
            objective: Objective::Pointwise,
        };
        let (model, _) = train(&x, &y, &[0..2], &p).unwrap();
        match &model.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_abs_diff_eq!(*threshold, 0.5, epsilon = 0.0),
            other => panic!("expected a split at the root, got {other:?}"),
        }
        let probe = Array2::from_shape_fn((2, 1), |(i, _)| if i == 0 { 0.25 } else { 0.75 });
        let preds = model.predict(&probe);
        assert_abs_diff_eq!(preds[0], 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(preds[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn pairwise_gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = 7;
        let targets: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let preds: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let groups = [0..m];
        let ctx = objective::GroupContext::new(&targets, &groups);
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m];
        objective::gradients(
            Objective::PairwiseLogistic,
            &preds,
            &targets,
            &groups,
            &ctx,
            &mut grad,
            &mut hess,
        );
        let loss = |p: &[f64]| -> f64 {
            let mut total = 0.0;
            for a in 0..m {
                for b in 0..m {
                    if targets[a] > targets[b] {
                        total += (1.0 + (-(p[a] - p[b])).exp()).ln();
                    }
                }
            }
            total
        };
        let h = 1e-6;
        for i in 0..m {
            let mut plus = preds.clone();
            let mut minus = preds.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert_abs_diff_eq!(grad[i], fd, epsilon = 1e-6);
            // The second difference needs a wider step: the numerator loses
            // ~16 digits to cancellation at h = 1e-6.
            let h2 = 1e-4;
            plus[i] = preds[i] + h2;
            minus[i] = preds[i] - h2;
            let fd2 = (loss(&plus) - 2.0 * loss(&preds) + loss(&minus)) / (h2 * h2);
            assert_abs_diff_eq!(hess[i], fd2, epsilon = 1e-5);
        }
    }

    #[test]
    fn lambda_swap_cost_matches_full_ndcg_reevaluation() {
        use crate::rankcorr::{ndcg, RelevanceVector};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m = rng.gen_range(2..=6);
            let targets: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let preds: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rel = RelevanceVector::from_scores(&targets).unwrap();
            let order = descending_order(&preds);
            let mut position = vec![0usize; m];
            for (pos, &item) in order.iter().enumerate() {
                position[item] = pos;
            }
            let base: f64 = ndcg(&order, &rel).unwrap();
            let gains: Vec<f64> = rel.grades().iter().map(|&g| objective::gain(g)).collect();
            let ideal: f64 = {
                let mut s = gains.clone();
                s.sort_by(|a, b| b.partial_cmp(a).unwrap());
                s.iter()
                    .enumerate()
                    .map(|(p, &g)| g * objective::discount::<f64>(p))
                    .sum()
            };
            for a in 0..m {
                for b in 0..a {
                    let incremental = ((gains[a] - gains[b])
                        * (objective::discount::<f64>(position[a])
                            - objective::discount::<f64>(position[b]))
                        / ideal)
                        .abs();
                    let mut swapped = order.clone();
                    swapped.swap(position[a], position[b]);
                    let full: f64 = ndcg(&swapped, &rel).unwrap();
                    assert_abs_diff_eq!(incremental, (full - base).abs(), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn saturated_pairs_leave_almost_no_gradient() {
        let targets = vec![1.0, 0.0];
        let preds = vec![10.0, 0.0]; // correctly ordered, huge margin
        let groups = [0..2];
        let ctx = objective::GroupContext::new(&targets, &groups);
        let mut grad = vec![0.0f64; 2];
        let mut hess = vec![0.0f64; 2];
        objective::gradients(
            Objective::PairwiseLogistic,
            &preds,
            &targets,
            &groups,
            &ctx,
            &mut grad,
            &mut hess,
        );
        assert!(grad[0].abs() < 1e-3 && grad[1].abs() < 1e-3, "{grad:?}");
    }

    #[test]
    fn lambda_training_lifts_group_ndcg() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n_groups = 20;
        let per = 5;
        let n = n_groups * per;
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0f64));
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 * x[[i, 0]] - x[[i, 1]] + 0.5 * x[[i, 2]])
            .collect();
        let groups: Vec<_> = (0..n_groups).map(|g| g * per..(g + 1) * per).collect();
        let (model, _) = train(&x, &y, &groups, &params(Objective::LambdaNdcg)).unwrap();
        let preds = model.predict(&x);
        let mut total = 0.0;
        for range in &groups {
            total += objective::group_ndcg(&preds[range.clone()], &y[range.clone()]);
        }
        let mean = total / n_groups as f64;
        assert!(mean > 0.95, "mean train ndcg {mean}");
    }

    #[test]
    fn singleton_groups_are_inert_for_ranking() {
        let x = Array2::from_shape_fn((3, 1), |(i, _)| i as f64);
        let y = vec![0.3, 0.9, 0.1];
        let groups = [0..1, 1..2, 2..3];
        let (model, _) = train(&x, &y, &groups, &params(Objective::LambdaNdcg)).unwrap();
        for p in model.predict(&x) {
            assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn bad_group_tilings_are_rejected() {
        let x = Array2::from_shape_fn((4, 1), |(i, _)| i as f64);
        let y = vec![0.0, 1.0, 2.0, 3.0];
        for groups in [vec![0..2], vec![0..3, 2..4], vec![0..2, 3..4]] {
            assert!(matches!(
                train(&x, &y, &groups, &GbdtParams::default()),
                Err(GbdtError::BadGroups(_))
            ));
        }
    }

    #[test]
    fn serialized_models_predict_identically() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 30;
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0f64));
        let y: Vec<f64> = (0..n).map(|i| x[[i, 0]] * x[[i, 1]]).collect();
        let (model, _) = train(&x, &y, &[0..n], &params(Objective::Pointwise)).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: GbdtModel<f64> = serde_json::from_str(&json).unwrap();
        let pa: Vec<u64> = model.predict(&x).iter().map(|v| v.to_bits()).collect();
        let pb: Vec<u64> = back.predict(&x).iter().map(|v| v.to_bits()).collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn rank_orders_by_score_with_index_ties() {
        let x = Array2::from_shape_fn((3, 1), |(i, _)| i as f64);
        let model = GbdtModel { objective: Objective::Pointwise, base_score: 1.0, trees: vec![] };
        let ranked = model.rank(&x);
        assert_eq!(ranked, vec![(0, 1.0), (1, 1.0), (2, 1.0)]);
    }
}
