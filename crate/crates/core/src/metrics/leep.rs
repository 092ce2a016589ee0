//! Log-likelihood transfer estimates built on a source head's predictions.
//!
//! [`nce`] hardens the source predictions to their argmax and measures the
//! negative conditional entropy of target labels given that pseudo-label.
//! [`leep`] keeps the soft predictions: it forms the empirical joint of
//! (target label, source class), turns it into a conditional, and scores
//! the mean log-likelihood of pushing each sample's soft prediction
//! through that conditional. Both are `<= 0`, larger is better.

use super::{MetricValue, MetricsError};
use crate::data::SourceProbs;
use crate::num::{count, Scalar};

fn check_labels<R: Scalar>(probs: &SourceProbs<R>, labels: &[u32]) -> Result<u32, MetricsError> {
    if probs.n_samples() != labels.len() {
        return Err(MetricsError::LabelMismatch { left: probs.n_samples(), right: labels.len() });
    }
    Ok(labels.iter().copied().max().map_or(1, |m| m + 1))
}

/// Row argmax with ties resolved to the lowest column index.
fn argmax_row<R: Scalar>(row: &[R]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Negative conditional entropy of target labels given hardened source
/// predictions: `sum_{y,z} P(y,z) ln P(y|z)`.
pub fn nce<R: Scalar>(probs: &SourceProbs<R>, labels: &[u32]) -> Result<MetricValue<R>, MetricsError> {
    let n_classes = check_labels(probs, labels)?;
    let n = probs.n_samples();
    let zc = probs.n_source_classes();
    let mut joint = vec![vec![R::zero(); zc]; n_classes as usize];
    let inv_n = R::one() / count::<R>(n);
    for (i, &y) in labels.iter().enumerate() {
        let row: Vec<R> = probs.probs().row(i).to_vec();
        joint[y as usize][argmax_row(&row)] += inv_n;
    }
    let mut score = R::zero();
    for z in 0..zc {
        let pz: R = joint.iter().map(|r| r[z]).sum();
        if pz <= R::zero() {
            continue;
        }
        for yrow in &joint {
            let pyz = yrow[z];
            if pyz > R::zero() {
                score += pyz * (pyz / pz).ln();
            }
        }
    }
    Ok(MetricValue::clean(score))
}

/// Mean log-likelihood of the empirical-conditional predictor that maps
/// soft source predictions to target labels.
pub fn leep<R: Scalar>(probs: &SourceProbs<R>, labels: &[u32]) -> Result<MetricValue<R>, MetricsError> {
    let n_classes = check_labels(probs, labels)?;
    let n = probs.n_samples();
    let zc = probs.n_source_classes();
    let inv_n = R::one() / count::<R>(n);

    // joint[y][z] = (1/n) sum_i theta_i(z) [y_i = y]
    let mut joint = vec![vec![R::zero(); zc]; n_classes as usize];
    for (i, &y) in labels.iter().enumerate() {
        for (z, &p) in probs.probs().row(i).iter().enumerate() {
            joint[y as usize][z] += p * inv_n;
        }
    }
    let marginal_z: Vec<R> = (0..zc).map(|z| joint.iter().map(|r| r[z]).sum()).collect();

    let mut total = R::zero();
    for (i, &y) in labels.iter().enumerate() {
        let mut eep = R::zero();
        for (z, &p) in probs.probs().row(i).iter().enumerate() {
            if marginal_z[z] > R::zero() {
                eep += joint[y as usize][z] / marginal_z[z] * p;
            }
        }
        if eep <= R::zero() {
            return Err(MetricsError::Degenerate(format!(
                "sample {i} has zero likelihood under the empirical predictor"
            )));
        }
        total += eep.ln();
    }
    Ok(MetricValue::clean(total * inv_n))
}
