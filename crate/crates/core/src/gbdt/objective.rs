//! Gradient/hessian computation for the three boosting objectives.
//!
//! Ranking gradients are pair-driven inside each query group. A pair is
//! formed whenever one target is strictly larger; tied targets never pair.
//! The position-discount machinery matches the NDCG evaluator exactly,
//! which the swap-consistency test in the parent module relies on.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::num::{count, real, wide, Scalar};
use crate::rankcorr::{descending_order, RelevanceVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Squared error on raw targets; groups are ignored.
    Pointwise,
    /// Logistic loss on score differences of misordered pairs.
    PairwiseLogistic,
    /// Pairwise logistic gradients weighted by the NDCG swap cost.
    #[default]
    LambdaNdcg,
}

/// Per-group quantities that stay fixed across boosting iterations.
pub(crate) struct GroupContext<R> {
    /// Exponential gain per item, aligned with instance order.
    gains: Vec<Vec<R>>,
    ideal_dcg: Vec<R>,
}

// Same definitions as the NDCG evaluator, kept bit-identical so swap
// costs agree with full re-evaluation.
pub(crate) fn gain<R: Scalar>(grade: u32) -> R {
    real::<R>((2.0f64).powi(grade as i32) - 1.0)
}

pub(crate) fn discount<R: Scalar>(position: usize) -> R {
    real::<R>(1.0 / ((position + 2) as f64).log2())
}

impl<R: Scalar> GroupContext<R> {
    pub fn new(targets: &[R], groups: &[Range<usize>]) -> Self {
        let mut gains = Vec::with_capacity(groups.len());
        let mut ideal_dcg = Vec::with_capacity(groups.len());
        for range in groups {
            let slice = &targets[range.clone()];
            let rel = RelevanceVector::from_scores(slice)
                .expect("targets are validated finite");
            let g: Vec<R> = rel.grades().iter().map(|&r| gain(r)).collect();
            let mut sorted = g.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let ideal: R = sorted
                .iter()
                .enumerate()
                .map(|(pos, &gn)| gn * discount::<R>(pos))
                .sum();
            gains.push(g);
            ideal_dcg.push(ideal);
        }
        Self { gains, ideal_dcg }
    }
}

fn sigmoid<R: Scalar>(x: R) -> R {
    // Split on sign so the exponential never overflows.
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// Fill `grad`/`hess` for the current predictions. Returns the number of
/// contributing pairs (pointwise counts every instance instead).
pub(crate) fn gradients<R: Scalar>(
    objective: Objective,
    preds: &[R],
    targets: &[R],
    groups: &[Range<usize>],
    ctx: &GroupContext<R>,
    grad: &mut [R],
    hess: &mut [R],
) -> usize {
    grad.fill(R::zero());
    hess.fill(R::zero());
    match objective {
        Objective::Pointwise => {
            for i in 0..preds.len() {
                grad[i] = preds[i] - targets[i];
                hess[i] = R::one();
            }
            preds.len()
        }
        Objective::PairwiseLogistic | Objective::LambdaNdcg => {
            let weighted = objective == Objective::LambdaNdcg;
            let mut pairs = 0;
            for (gi, range) in groups.iter().enumerate() {
                let m = range.len();
                if m < 2 {
                    continue;
                }
                // Positions of each group member in the predicted ranking.
                let order = descending_order(&preds[range.clone()]);
                let mut position = vec![0usize; m];
                for (pos, &item) in order.iter().enumerate() {
                    position[item] = pos;
                }
                let ideal = ctx.ideal_dcg[gi];
                for a in 0..m {
                    for b in 0..m {
                        if targets[range.start + a] <= targets[range.start + b] {
                            continue;
                        }
                        // a is the better item of the pair.
                        let (ia, ib) = (range.start + a, range.start + b);
                        let s = sigmoid(preds[ib] - preds[ia]);
                        let w = if weighted {
                            let dg = ctx.gains[gi][a] - ctx.gains[gi][b];
                            let dd = discount::<R>(position[a]) - discount::<R>(position[b]);
                            (dg * dd / ideal).abs()
                        } else {
                            R::one()
                        };
                        let lambda = w * s;
                        let curvature = w * s * (R::one() - s);
                        grad[ia] -= lambda;
                        grad[ib] += lambda;
                        hess[ia] += curvature;
                        hess[ib] += curvature;
                        pairs += 1;
                    }
                }
            }
            pairs
        }
    }
}

/// NDCG of ranking a group by `preds` against grades derived from
/// `targets`, sharing the gain/discount definitions used for training.
#[cfg(test)]
pub(crate) fn group_ndcg<R: Scalar>(preds: &[R], targets: &[R]) -> R {
    let rel = RelevanceVector::from_scores(targets).expect("finite targets");
    let order = descending_order(preds);
    crate::rankcorr::ndcg(&order, &rel).expect("order is a permutation")
}

/// Mean squared error, the pointwise training loss.
#[cfg(test)]
pub(crate) fn mse<R: Scalar>(preds: &[R], targets: &[R]) -> f64 {
    let n = preds.len().max(1);
    let total: R = preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    wide(total / count::<R>(n))
}
