//! Rank statistics: weighted Kendall correlation, NDCG, tie-averaged ranks.
//!
//! These are the measures the rest of the engine optimizes and reports.
//! The weighted correlation follows the pairwise form
//!
//! ```text
//!             sum_{i<j} w_ij sgn(S_i - S_j) sgn(T_i - T_j)
//! tau_w = ---------------------------------------------------------
//!         sqrt(sum w_ij sgn(S_i-S_j)^2) sqrt(sum w_ij sgn(T_i-T_j)^2)
//! ```
//!
//! with `sgn(0) = 0`, so tied pairs contribute nothing to either side.
//! The default weighting is top-heavy: `w_ij = 1/(r_i+1) + 1/(r_j+1)`
//! where `r` is the zero-based rank of an item under the reference list
//! `T`, descending, ties broken by index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{count, real, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum RankCorrError {
    #[error("input lists have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 items, got {0}")]
    TooShort(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("order is not a permutation of 0..{expected}")]
    NotAPermutation { expected: usize },
    #[error("relevance vector has {rel} grades but the order has {order} items")]
    RelevanceMismatch { rel: usize, order: usize },
}

/// Pair weighting for [`weighted_kendall_tau`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `w_ij = 1/(rank_i+1) + 1/(rank_j+1)` over ranks in the reference list.
    #[default]
    HyperbolicAdditive,
    /// `w_ij = 1`; reduces the statistic to the tie-adjusted classic form.
    Uniform,
}

/// A correlation value plus a degeneracy marker.
///
/// `all_ties` is set when one of the lists had no untied pairs, in which
/// case the value is defined as 0 rather than 0/0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation<R> {
    pub value: R,
    pub all_ties: bool,
}

/// Indices `0..n` sorted so the corresponding values descend; equal values
/// keep index order. This is the tie rule used everywhere in the crate.
pub fn descending_order<R: Scalar>(values: &[R]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order
}

fn validate_pair<R: Scalar>(scores: &[R], reference: &[R]) -> Result<(), RankCorrError> {
    if scores.len() != reference.len() {
        return Err(RankCorrError::LengthMismatch { left: scores.len(), right: reference.len() });
    }
    if scores.len() < 2 {
        return Err(RankCorrError::TooShort(scores.len()));
    }
    for (idx, v) in scores.iter().chain(reference.iter()).enumerate() {
        if !v.is_finite() {
            return Err(RankCorrError::NonFinite(idx % scores.len()));
        }
    }
    Ok(())
}

/// Weighted Kendall correlation of `scores` against `reference`.
///
/// The weighting ranks items by `reference` (descending, ties by index),
/// so the statistic is asymmetric under the hyperbolic scheme: the
/// reference side decides which pairs matter most.
pub fn weighted_kendall_tau<R: Scalar>(
    scores: &[R],
    reference: &[R],
    scheme: WeightScheme,
) -> Result<Correlation<R>, RankCorrError> {
    validate_pair(scores, reference)?;
    let n = scores.len();

    let weight_of: Vec<R> = match scheme {
        WeightScheme::HyperbolicAdditive => {
            let order = descending_order(reference);
            let mut rank = vec![0usize; n];
            for (pos, &item) in order.iter().enumerate() {
                rank[item] = pos;
            }
            rank.iter().map(|&r| R::one() / count::<R>(r + 1)).collect()
        }
        WeightScheme::Uniform => vec![real(0.5); n],
    };

    let mut num = R::zero();
    let mut den_s = R::zero();
    let mut den_t = R::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = weight_of[i] + weight_of[j];
            let ss = sign(scores[i] - scores[j]);
            let st = sign(reference[i] - reference[j]);
            num += w * ss * st;
            den_s += w * ss * ss;
            den_t += w * st * st;
        }
    }
    let den = den_s * den_t;
    if den == R::zero() {
        return Ok(Correlation { value: R::zero(), all_ties: true });
    }
    Ok(Correlation { value: num / den.sqrt(), all_ties: false })
}

/// Classic (unweighted) Kendall tau-a: concordant minus discordant pairs
/// over all `n(n-1)/2` pairs. Tied pairs count toward neither side of the
/// numerator but stay in the denominator.
pub fn kendall_tau<R: Scalar>(a: &[R], b: &[R]) -> Result<R, RankCorrError> {
    validate_pair(a, b)?;
    let n = a.len();
    let mut num = R::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            num += sign(a[i] - a[j]) * sign(b[i] - b[j]);
        }
    }
    Ok(num / count::<R>(n * (n - 1) / 2))
}

fn sign<R: Scalar>(d: R) -> R {
    if d > R::zero() {
        R::one()
    } else if d < R::zero() {
        -R::one()
    } else {
        R::zero()
    }
}

/// Competition-free ranks: the best (largest) value gets rank 1 and tied
/// values share the arithmetic mean of the positions they occupy, so the
/// ranks of `n` items always sum to `n(n+1)/2`.
pub fn tie_average_ranks<R: Scalar>(values: &[R]) -> Result<Vec<R>, RankCorrError> {
    for (idx, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(RankCorrError::NonFinite(idx));
        }
    }
    let order = descending_order(values);
    let n = values.len();
    let mut ranks = vec![R::zero(); n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end are 0-based; mean 1-based rank of the block.
        let mean_rank = real::<R>((start + end + 1) as f64 / 2.0);
        for &item in &order[start..end] {
            ranks[item] = mean_rank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Integer relevance grades indexed by item id.
///
/// Grades come from a ground-truth ordering of `K` items: the item ranked
/// at zero-based position `p` receives grade `K - 1 - p`, so grades are a
/// permutation of `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceVector {
    grades: Vec<u32>,
}

impl RelevanceVector {
    /// Grades from an explicit ground-truth order (best item first).
    pub fn from_order(order: &[usize]) -> Result<Self, RankCorrError> {
        check_permutation(order)?;
        let k = order.len();
        let mut grades = vec![0u32; k];
        for (pos, &item) in order.iter().enumerate() {
            grades[item] = (k - 1 - pos) as u32;
        }
        Ok(Self { grades })
    }

    /// Grades from raw scores: items are ordered descending, ties broken by
    /// index, and graded top-down.
    pub fn from_scores<R: Scalar>(scores: &[R]) -> Result<Self, RankCorrError> {
        for (idx, v) in scores.iter().enumerate() {
            if !v.is_finite() {
                return Err(RankCorrError::NonFinite(idx));
            }
        }
        Self::from_order(&descending_order(scores))
    }

    pub fn grades(&self) -> &[u32] {
        &self.grades
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

fn check_permutation(order: &[usize]) -> Result<(), RankCorrError> {
    let k = order.len();
    let mut seen = vec![false; k];
    for &item in order {
        if item >= k || seen[item] {
            return Err(RankCorrError::NotAPermutation { expected: k });
        }
        seen[item] = true;
    }
    Ok(())
}

/// Normalized discounted cumulative gain of a predicted ordering.
///
/// Gains are `2^grade - 1`, the discount at one-based position `k` is
/// `1/log2(k+1)`, and the full list is scored (no truncation). The result
/// is the ratio to the ideal (grade-descending) arrangement; a list whose
/// ideal gain is zero (single item) scores 1.
pub fn ndcg<R: Scalar>(predicted_order: &[usize], relevance: &RelevanceVector) -> Result<R, RankCorrError> {
    if predicted_order.len() != relevance.len() {
        return Err(RankCorrError::RelevanceMismatch {
            rel: relevance.len(),
            order: predicted_order.len(),
        });
    }
    check_permutation(predicted_order)?;

    let gain = |grade: u32| real::<R>((2.0f64).powi(grade as i32) - 1.0);
    let discount = |pos: usize| real::<R>(1.0 / ((pos + 2) as f64).log2());

    let mut dcg = R::zero();
    for (pos, &item) in predicted_order.iter().enumerate() {
        dcg += gain(relevance.grades[item]) * discount(pos);
    }
    let mut sorted = relevance.grades.clone();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut ideal = R::zero();
    for (pos, &grade) in sorted.iter().enumerate() {
        ideal += gain(grade) * discount(pos);
    }
    if ideal == R::zero() {
        return Ok(R::one());
    }
    Ok(dcg / ideal)
}
