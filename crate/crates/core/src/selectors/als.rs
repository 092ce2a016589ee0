//! Low-rank factorization of the dataset-by-metric score matrix, plus a
//! ridge regression that maps dataset embeddings onto latent factors so
//! unseen datasets can be scored.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::num::{real, Scalar};
use crate::rng;

#[derive(Debug, Error)]
pub enum AlsError {
    #[error("matrix has no rows or columns")]
    Empty,
    #[error("rank {rank} exceeds min dimension {limit}")]
    RankTooLarge { rank: usize, limit: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("{left} embedding rows vs {right} factor rows")]
    RowMismatch { left: usize, right: usize },
    #[error("linear solve failed: {0}")]
    Linalg(#[from] LinalgError),
}

/// Latent factors from alternating least squares: `m ~ u . v^T`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Factorization<R> {
    /// One row per row of the input matrix.
    pub u: Array2<R>,
    /// One row per column of the input matrix.
    pub v: Array2<R>,
}

impl<R: Scalar> Factorization<R> {
    pub fn reconstruct(&self) -> Array2<R> {
        self.u.dot(&self.v.t())
    }
}

fn regularized_gram<R: Scalar>(f: &Array2<R>, reg: R) -> Array2<R> {
    let mut g = f.t().dot(f);
    for i in 0..g.nrows() {
        g[[i, i]] += reg;
    }
    g
}

/// Alternating least squares with ridge term `reg` on both factors.
///
/// Each half-step solves its normal equations exactly, so the penalized
/// squared reconstruction error never increases across iterations.
pub fn als_factorize<R: Scalar>(
    m: &Array2<R>,
    rank: usize,
    reg: f64,
    iters: u32,
    seed: u64,
) -> Result<Factorization<R>, AlsError> {
    let (j, k) = m.dim();
    if j == 0 || k == 0 {
        return Err(AlsError::Empty);
    }
    if rank == 0 {
        return Err(AlsError::ZeroRank);
    }
    let limit = j.min(k);
    if rank > limit {
        return Err(AlsError::RankTooLarge { rank, limit });
    }
    let reg = real::<R>(reg);
    let mut gen = rng::rng(seed);
    let mut v = Array2::from_shape_fn((k, rank), |_| real::<R>(gen.gen_range(-0.5..0.5)));
    let mut u = Array2::<R>::zeros((j, rank));
    for _ in 0..iters {
        // (V^T V + reg I) U^T = (M V)^T
        let ut = linalg::solve(&regularized_gram(&v, reg), &m.dot(&v).t().to_owned())?;
        u = ut.t().to_owned();
        // (U^T U + reg I) V^T = (M^T U)^T
        let vt = linalg::solve(&regularized_gram(&u, reg), &m.t().dot(&u).t().to_owned())?;
        v = vt.t().to_owned();
    }
    Ok(Factorization { u, v })
}

/// Ridge map from embedding rows `e` to factor rows `u`, in the dual form
/// `E^T (E E^T + reg I)^{-1} U` so it stays a small dense solve even when
/// the embedding dimension dwarfs the number of rows.
pub fn ridge_map<R: Scalar>(
    e: &Array2<R>,
    u: &Array2<R>,
    reg: f64,
) -> Result<Array2<R>, AlsError> {
    if e.nrows() != u.nrows() {
        return Err(AlsError::RowMismatch { left: e.nrows(), right: u.nrows() });
    }
    if e.nrows() == 0 {
        return Err(AlsError::Empty);
    }
    let mut gram = e.dot(&e.t());
    let reg = real::<R>(reg);
    for i in 0..gram.nrows() {
        gram[[i, i]] += reg;
    }
    let x = linalg::solve(&gram, u)?;
    Ok(e.t().dot(&x))
}
