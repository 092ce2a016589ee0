//! Single regression tree fitted to gradient/hessian pairs.
//!
//! Split search is exact: every feature is scanned in presorted order at
//! every node, so results do not depend on binning and are bitwise
//! reproducible. Ties in gain resolve to the lowest feature index, then
//! the lowest threshold, because the scan only replaces the incumbent on
//! a strict improvement.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// Additive regularizer on leaf denominators and split gains.
pub(crate) const LEAF_REG: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Node<R> {
    Split { feature: u32, threshold: R, left: u32, right: u32 },
    Leaf { weight: R },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tree<R> {
    pub nodes: Vec<Node<R>>,
}

impl<R: Scalar> Tree<R> {
    pub fn predict_row(&self, row: ArrayView1<R>) -> R {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { weight } => return *weight,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature as usize] < *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    /// Multiply every leaf weight by `factor` (shrinkage).
    pub fn scale_leaves(&mut self, factor: R) {
        for node in &mut self.nodes {
            if let Node::Leaf { weight } = node {
                *weight *= factor;
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Reusable buffers for tree construction: per-feature index and value
/// arrays that get range-partitioned in place as the tree grows, plus the
/// partition's spill buffers. Values are gathered out of the row-major
/// feature matrix once, so split scans read them sequentially. One instance
/// serves a whole training run.
pub(crate) struct SplitScratch<R> {
    /// Feature values in `presort` order, the pristine copy `vals` resets to.
    sorted_vals: Vec<Vec<R>>,
    work: Vec<Vec<u32>>,
    vals: Vec<Vec<R>>,
    spill: Vec<u32>,
    spill_vals: Vec<R>,
}

impl<R: Scalar> SplitScratch<R> {
    pub fn new(features: &Array2<R>, sorted: &[Vec<u32>]) -> Self {
        let n = features.nrows();
        let sorted_vals: Vec<Vec<R>> = sorted
            .iter()
            .enumerate()
            .map(|(f, order)| order.iter().map(|&i| features[[i as usize, f]]).collect())
            .collect();
        Self {
            sorted_vals,
            work: vec![vec![0; n]; sorted.len()],
            vals: vec![vec![R::zero(); n]; sorted.len()],
            spill: Vec::with_capacity(n),
            spill_vals: Vec::with_capacity(n),
        }
    }
}

pub(crate) struct TreeBuilder<'a, R: Scalar> {
    features: &'a Array2<R>,
    /// Per feature, all row indices sorted ascending by that feature.
    sorted: &'a [Vec<u32>],
    grad: &'a [R],
    hess: &'a [R],
    max_depth: u32,
    min_samples_leaf: usize,
    reg: R,
    in_node: Vec<bool>,
    scratch: &'a mut SplitScratch<R>,
    nodes: Vec<Node<R>>,
}

struct Split<R> {
    feature: usize,
    threshold: R,
    gain: R,
}

impl<'a, R: Scalar> TreeBuilder<'a, R> {
    pub fn new(
        features: &'a Array2<R>,
        sorted: &'a [Vec<u32>],
        grad: &'a [R],
        hess: &'a [R],
        max_depth: u32,
        min_samples_leaf: usize,
        scratch: &'a mut SplitScratch<R>,
    ) -> Self {
        Self {
            features,
            sorted,
            grad,
            hess,
            max_depth,
            min_samples_leaf,
            reg: crate::num::real(LEAF_REG),
            in_node: vec![false; features.nrows()],
            scratch,
            nodes: Vec::new(),
        }
    }

    pub fn build(mut self) -> Tree<R> {
        let n = self.features.nrows();
        let SplitScratch { sorted_vals, work, vals, .. } = &mut *self.scratch;
        for f in 0..work.len() {
            work[f].copy_from_slice(&self.sorted[f]);
            vals[f].copy_from_slice(&sorted_vals[f]);
        }
        let members: Vec<u32> = (0..n as u32).collect();
        self.grow(&members, 0, n, 0);
        Tree { nodes: self.nodes }
    }

    fn leaf(&mut self, members: &[u32]) -> u32 {
        let mut g = R::zero();
        let mut h = R::zero();
        for &i in members {
            g += self.grad[i as usize];
            h += self.hess[i as usize];
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { weight: -g / (h + self.reg) });
        id
    }

    /// The node owns `start..start + len` of every scratch array, each range
    /// ascending by its feature; partitioning those ranges in place on the
    /// way down keeps every split scan linear in the node size instead of
    /// the full row count, without allocating per node.
    fn grow(&mut self, members: &[u32], start: usize, len: usize, depth: u32) -> u32 {
        if depth >= self.max_depth || members.len() < 2 * self.min_samples_leaf {
            return self.leaf(members);
        }
        let Some(split) = self.best_split(members, start, len) else {
            return self.leaf(members);
        };
        let (left, right): (Vec<u32>, Vec<u32>) = members
            .iter()
            .partition(|&&i| self.features[[i as usize, split.feature]] < split.threshold);
        for &i in &left {
            self.in_node[i as usize] = true;
        }
        // Stable flag partition of each range, so both sides stay
        // feature-sorted: compact the left members forward, spill the rest,
        // copy the spill back after them. Values travel with their indices.
        let SplitScratch { work, vals, spill, spill_vals, .. } = &mut *self.scratch;
        for (order, ovals) in work.iter_mut().zip(vals.iter_mut()) {
            let range = &mut order[start..start + len];
            let vrange = &mut ovals[start..start + len];
            spill.clear();
            spill_vals.clear();
            let mut kept = 0;
            for k in 0..range.len() {
                let i = range[k];
                let v = vrange[k];
                if self.in_node[i as usize] {
                    range[kept] = i;
                    vrange[kept] = v;
                    kept += 1;
                } else {
                    spill.push(i);
                    spill_vals.push(v);
                }
            }
            range[kept..].copy_from_slice(spill);
            vrange[kept..].copy_from_slice(spill_vals);
        }
        for &i in &left {
            self.in_node[i as usize] = false;
        }
        // Reserve the parent slot before growing children.
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { weight: R::zero() });
        let nl = left.len();
        let left_id = self.grow(&left, start, nl, depth + 1);
        let right_id = self.grow(&right, start + nl, len - nl, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left_id,
            right: right_id,
        };
        id
    }

    fn best_split(&self, members: &[u32], start: usize, len: usize) -> Option<Split<R>> {
        let mut total_g = R::zero();
        let mut total_h = R::zero();
        for &i in members {
            total_g += self.grad[i as usize];
            total_h += self.hess[i as usize];
        }
        let parent_score = total_g * total_g / (total_h + self.reg);
        let half = crate::num::real::<R>(0.5);
        let mut best: Option<Split<R>> = None;
        for (feature, (order, ovals)) in
            self.scratch.work.iter().zip(&self.scratch.vals).enumerate()
        {
            let ordered = &order[start..start + len];
            let values = &ovals[start..start + len];
            let mut left_g = R::zero();
            let mut left_h = R::zero();
            for k in 0..len - 1 {
                let i = ordered[k] as usize;
                left_g += self.grad[i];
                left_h += self.hess[i];
                let here = values[k];
                let next = values[k + 1];
                if here == next {
                    continue;
                }
                if k + 1 < self.min_samples_leaf || len - k - 1 < self.min_samples_leaf {
                    continue;
                }
                let right_g = total_g - left_g;
                let right_h = total_h - left_h;
                let gain = left_g * left_g / (left_h + self.reg)
                    + right_g * right_g / (right_h + self.reg)
                    - parent_score;
                if gain > R::zero() && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(Split { feature, threshold: half * (here + next), gain });
                }
            }
        }
        best
    }
}

/// Row indices of every feature column, each sorted ascending by value.
/// `sort_by` is stable, so equal values keep index order.
pub(crate) fn presort<R: Scalar>(features: &Array2<R>) -> Vec<Vec<u32>> {
    let n = features.nrows();
    (0..features.ncols())
        .map(|j| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                features[[a as usize, j]]
                    .partial_cmp(&features[[b as usize, j]])
                    .expect("features are validated finite")
            });
            idx
        })
        .collect()
}
